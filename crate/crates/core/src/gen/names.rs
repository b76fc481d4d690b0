//! Bundled name and title tables.
//!
//! First names and surnames are common entries from US census frequency
//! lists; movie titles are assembled from adjective/noun word tables.

use alloc::format;
use alloc::string::String;

use rand::seq::IndexedRandom;
use rand::Rng;

pub const FEMALE_FIRST: &[&str] = &[
    "Mary",
    "Patricia",
    "Jennifer",
    "Linda",
    "Elizabeth",
    "Barbara",
    "Susan",
    "Jessica",
    "Sarah",
    "Karen",
    "Lisa",
    "Nancy",
    "Betty",
    "Sandra",
    "Margaret",
    "Ashley",
    "Kimberly",
    "Emily",
    "Donna",
    "Michelle",
    "Carol",
    "Amanda",
    "Melissa",
    "Deborah",
    "Stephanie",
    "Dorothy",
    "Rebecca",
    "Sharon",
    "Laura",
    "Cynthia",
    "Amy",
    "Kathleen",
    "Angela",
    "Shirley",
    "Brenda",
    "Emma",
    "Anna",
    "Pamela",
    "Nicole",
    "Samantha",
    "Katherine",
    "Christine",
    "Helen",
    "Debra",
    "Rachel",
    "Carolyn",
    "Janet",
    "Maria",
    "Catherine",
    "Heather",
];

pub const MALE_FIRST: &[&str] = &[
    "James",
    "Robert",
    "John",
    "Michael",
    "David",
    "William",
    "Richard",
    "Joseph",
    "Thomas",
    "Christopher",
    "Charles",
    "Daniel",
    "Matthew",
    "Anthony",
    "Mark",
    "Donald",
    "Steven",
    "Andrew",
    "Paul",
    "Joshua",
    "Kenneth",
    "Kevin",
    "Brian",
    "George",
    "Timothy",
    "Ronald",
    "Jason",
    "Edward",
    "Jeffrey",
    "Ryan",
    "Jacob",
    "Gary",
    "Nicholas",
    "Eric",
    "Jonathan",
    "Stephen",
    "Larry",
    "Justin",
    "Scott",
    "Brandon",
    "Benjamin",
    "Samuel",
    "Gregory",
    "Alexander",
    "Patrick",
    "Frank",
    "Raymond",
    "Jack",
    "Dennis",
    "Jerry",
];

pub const SURNAMES: &[&str] = &[
    "Smith",
    "Johnson",
    "Williams",
    "Brown",
    "Jones",
    "Garcia",
    "Miller",
    "Davis",
    "Rodriguez",
    "Martinez",
    "Hernandez",
    "Lopez",
    "Gonzalez",
    "Wilson",
    "Anderson",
    "Thomas",
    "Taylor",
    "Moore",
    "Jackson",
    "Martin",
    "Lee",
    "Perez",
    "Thompson",
    "White",
    "Harris",
    "Sanchez",
    "Clark",
    "Ramirez",
    "Lewis",
    "Robinson",
    "Walker",
    "Young",
    "Allen",
    "King",
    "Wright",
    "Scott",
    "Torres",
    "Nguyen",
    "Hill",
    "Flores",
    "Green",
    "Adams",
    "Nelson",
    "Baker",
    "Hall",
    "Rivera",
    "Campbell",
    "Mitchell",
    "Carter",
    "Roberts",
    "Gomez",
    "Phillips",
    "Evans",
    "Turner",
    "Diaz",
    "Parker",
    "Cruz",
    "Edwards",
    "Collins",
    "Reyes",
    "Stewart",
    "Morris",
    "Morales",
    "Murphy",
    "Cook",
    "Rogers",
    "Gutierrez",
    "Ortiz",
    "Morgan",
    "Cooper",
    "Peterson",
    "Bailey",
    "Reed",
    "Kelly",
    "Howard",
    "Ramos",
    "Kim",
    "Cox",
    "Ward",
    "Richardson",
];

const TITLE_ADJECTIVES: &[&str] = &[
    "Silent",
    "Crimson",
    "Hidden",
    "Broken",
    "Golden",
    "Forgotten",
    "Last",
    "Burning",
    "Frozen",
    "Hollow",
    "Endless",
    "Distant",
    "Midnight",
    "Savage",
    "Wicked",
    "Lonely",
    "Electric",
    "Velvet",
    "Shattered",
    "Restless",
    "Secret",
    "Scarlet",
    "Wild",
    "Fading",
    "Iron",
    "Paper",
    "Bitter",
    "Lucky",
    "Northern",
    "Quiet",
];

const TITLE_NOUNS: &[&str] = &[
    "Harbor", "Kingdom", "Garden", "River", "Shadow", "Promise", "Horizon", "Mirror", "Empire", "Station", "Letter",
    "Storm", "Island", "Voyage", "Canyon", "Lantern", "Frontier", "Orchard", "Echo", "Citadel", "Tide", "Signal",
    "Highway", "Crown", "Ember", "Witness", "Summer", "Engine", "Compass", "Carnival",
];

/// Full name drawn from the gender-matched first-name table and the surname
/// table. Genders other than "Female"/"Male" draw from both first-name tables.
pub fn generate_name<R: Rng + ?Sized>(gender: &str, rng: &mut R) -> String {
    let first = match gender {
        "Female" => *FEMALE_FIRST.choose(rng).expect("non-empty table"),
        "Male" => *MALE_FIRST.choose(rng).expect("non-empty table"),
        _ => {
            let i = rng.random_range(0..FEMALE_FIRST.len() + MALE_FIRST.len());
            if i < FEMALE_FIRST.len() {
                FEMALE_FIRST[i]
            } else {
                MALE_FIRST[i - FEMALE_FIRST.len()]
            }
        }
    };
    let last = SURNAMES.choose(rng).expect("non-empty table");
    format!("{first} {last}")
}

pub fn generate_title<R: Rng + ?Sized>(rng: &mut R) -> String {
    let adj = TITLE_ADJECTIVES.choose(rng).expect("non-empty table");
    let noun = TITLE_NOUNS.choose(rng).expect("non-empty table");
    match rng.random_range(0..4u8) {
        0 => format!("The {adj} {noun}"),
        1 => format!("{adj} {noun}"),
        2 => {
            let other = TITLE_NOUNS.choose(rng).expect("non-empty table");
            format!("{noun} of the {adj} {other}")
        }
        _ => format!("A {adj} {noun}"),
    }
}
