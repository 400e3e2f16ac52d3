//! Word lists for the text-injection scenarios, kept verbatim.

pub const SYNONYMS_TRAIN_GOOD: [&str; 10] = [
    "positive", "great", "excellent", "favorable", "pleasant",
    "admirable", "beneficial", "wonderful", "commendable", "worthy",
];

pub const SYNONYMS_TRAIN_NUMBER: [&str; 10] = [
    "one", "three", "four", "five", "six",
    "seven", "eight", "nine", "ten", "eleven",
];

pub const SYNONYMS_TEST_GOOD: [&str; 1] = ["nice"];
pub const SYNONYMS_TEST_NUMBER: [&str; 1] = ["two"];

/// The published list has 99 entries.
pub const RANDOM_WORDS: [&str; 99] = [
    "breeze", "crystal", "jungle", "sunset", "clock",
    "river", "pencil", "butterfly", "cloud", "guitar", "forest",
    "echo", "mirror", "flame", "galaxy", "shadow", "storm", "pearl",
    "ember", "whisper", "velvet", "feather", "lantern", "cherry", "fog",
    "nutmeg", "rocket", "canyon", "harbor", "planet", "sketch", "compass",
    "dream", "saddle", "maple", "python", "quartz", "cactus", "ladder",
    "amber", "panther", "blanket", "marble", "candle", "helmet",
    "anchor", "sand", "ocean", "lemon", "boulder", "ink", "ribbon",
    "nest", "basket", "flute", "meadow", "thunder", "vine", "shell",
    "drift", "carpet", "sapphire", "tiger", "honey", "blossom", "stream",
    "mountain", "lighthouse", "cliff", "pebble", "tunnel", "bubble",
    "apple", "silver", "chalk", "frost", "comet", "antler", "bramble",
    "ripple", "beacon", "groove", "hazel", "dune", "harvest",
    "twig", "cobweb", "glider", "ivory", "petal", "plume",
    "island", "whistle", "puzzle", "snowflake", "cradle",
    "nail", "window", "tassel",
];

pub const SENTIMENT_POSITIVE: [&str; 50] = [
    "favorable", "happy", "joyful", "pleased", "delighted", "cheerful", "content", "grateful", "optimistic", "upbeat", "ecstatic",
    "radiant", "thrilled", "hopeful", "enthusiastic", "elated", "blissful", "satisfied", "charming", "agreeable", "nice",
    "awesome", "fabulous", "fantastic", "glorious", "marvelous", "splendid", "superb", "terrific", "admirable", "commendable",
    "noble", "excellent", "great", "incredible", "lively", "lovely", "magnificent", "outstanding", "peaceful",
    "kind", "rejoicing", "serene", "soothing", "supportive", "sympathetic", "tender", "vibrant", "warmhearted", "winsome",
];

/// "hostile" appears twice in the published list.
pub const SENTIMENT_NEGATIVE: [&str; 50] = [
    "harsh", "sad", "angry", "upset", "depressed", "bitter", "gloomy", "anxious", "worried", "hostile", "resentful",
    "unhappy", "irritable", "moody", "pessimistic", "fearful", "dismal", "horrible", "awful", "nasty", "unpleasant",
    "terrible", "mean", "cruel", "hurtful", "jealous", "malicious", "miserable", "regretful", "scornful",
    "troubled", "spiteful", "tense", "vindictive", "vulgar", "wicked", "wretched", "abrasive", "agonizing",
    "evil", "brutal", "callous", "coldhearted", "disrespectful", "frustrated", "hateful", "hostile", "intolerant", "nervous",
    "repulsive",
];

/// Label words for the dilution scenarios, indexed by class code.
pub const LABEL_WORDS: [&str; 2] = ["positive", "negative"];

/// Synonym groups, indexed by class code.
pub const GROUPS: [&str; 2] = ["good", "number"];

#[derive(Debug, Clone, PartialEq)]
pub struct WordBank {
    pub synonym_train: [Vec<&'static str>; 2],
    pub synonym_test: [Vec<&'static str>; 2],
    pub random_words: Vec<&'static str>,
    pub sentiment_positive: Vec<&'static str>,
    pub sentiment_negative: Vec<&'static str>,
}

impl WordBank {
    pub fn standard() -> Self {
        WordBank {
            synonym_train: [SYNONYMS_TRAIN_GOOD.to_vec(), SYNONYMS_TRAIN_NUMBER.to_vec()],
            synonym_test: [SYNONYMS_TEST_GOOD.to_vec(), SYNONYMS_TEST_NUMBER.to_vec()],
            random_words: RANDOM_WORDS.to_vec(),
            sentiment_positive: SENTIMENT_POSITIVE.to_vec(),
            sentiment_negative: SENTIMENT_NEGATIVE.to_vec(),
        }
    }

    /// Both sentiment lists, first occurrence kept.
    pub fn sentiment_union(&self) -> Vec<&'static str> {
        let mut out: Vec<&'static str> = Vec::new();
        for w in self.sentiment_positive.iter().chain(&self.sentiment_negative) {
            if !out.contains(w) {
                out.push(w);
            }
        }
        out
    }
}

impl Default for WordBank {
    fn default() -> Self {
        WordBank::standard()
    }
}
