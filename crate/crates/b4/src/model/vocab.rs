use crate::error::DataError;
use crate::ingest::NewsDoc;

/// Fixed ids for the special tokens. Hashed word ids start at 4, so the
/// specials can never collide with them.
pub const CLS: usize = 0;
pub const UP: usize = 1;
pub const DOWN: usize = 2;
pub const PAD: usize = 3;
pub const NUM_SPECIALS: usize = 4;

/// Hashing vocabulary: words map to ids in `[4, size)` via a seeded
/// multiplicative hash. No external assets, fully deterministic.
#[derive(Debug, Clone, Copy)]
pub struct Vocabulary {
    pub size: usize,
    pub hash_seed: u64,
}

impl Vocabulary {
    pub fn new(size: usize, hash_seed: u64) -> Result<Self, DataError> {
        if size <= NUM_SPECIALS {
            return Err(DataError::Config(format!(
                "vocabulary size must exceed {NUM_SPECIALS}, got {size}"
            )));
        }
        Ok(Vocabulary { size, hash_seed })
    }

    /// FNV-1a style hash seeded by `hash_seed`, folded into the non-special
    /// id range.
    pub fn word_id(&self, word: &str) -> usize {
        let mut h = 0xcbf29ce484222325u64 ^ self.hash_seed;
        for b in word.as_bytes() {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x100000001b3);
        }
        NUM_SPECIALS + (h % (self.size - NUM_SPECIALS) as u64) as usize
    }
}

/// Lowercase and split on anything that is not alphanumeric.
pub fn split_words(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(String::from)
        .collect()
}

/// Token id sequence with the marker layout [CLS],[UP],[DOWN],text…,[PAD]…
/// Special positions are stored explicitly so alternate layouts stay
/// config-switchable downstream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub ids: Vec<usize>,
    pub cls_pos: usize,
    pub up_pos: usize,
    pub down_pos: usize,
    /// For each position, the index (into the tokenized news list) of the
    /// document the token came from. Specials and padding carry `None`.
    pub origins: Vec<Option<usize>>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Concatenate the day's news into one marker-augmented sequence,
/// truncated or padded to exactly `max_len` ids.
pub fn tokenize_augment(
    news: &[NewsDoc],
    vocab: &Vocabulary,
    max_len: usize,
) -> Result<TokenSequence, DataError> {
    if max_len < NUM_SPECIALS {
        return Err(DataError::Config(format!(
            "sequence length must be at least {NUM_SPECIALS}, got {max_len}"
        )));
    }
    let mut ids = vec![CLS, UP, DOWN];
    let mut origins = vec![None, None, None];
    'outer: for (doc_idx, doc) in news.iter().enumerate() {
        for word in split_words(&doc.text) {
            if ids.len() >= max_len {
                break 'outer;
            }
            ids.push(vocab.word_id(&word));
            origins.push(Some(doc_idx));
        }
    }
    while ids.len() < max_len {
        ids.push(PAD);
        origins.push(None);
    }
    Ok(TokenSequence {
        ids,
        cls_pos: 0,
        up_pos: 1,
        down_pos: 2,
        origins,
    })
}
