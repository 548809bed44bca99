//! Byte-pair-encoding subword vocabulary.
//!
//! Text is lowercased and split into words (alphanumeric runs) and single
//! punctuation characters. Each word is spelled as characters, the first one
//! carrying a word-start mark, and merges are learned over those spellings.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PAD_ID: u32 = 0;
pub const BOS_ID: u32 = 1;
pub const EOS_ID: u32 = 2;
pub const UNK_ID: u32 = 3;
pub const SEP_ID: u32 = 4;

/// Token strings of the reserved ids, in id order.
pub const SPECIAL_TOKENS: [&str; 5] = ["<pad>", "<s>", "</s>", "<unk>", "<sep>"];

/// Emitted by [`Vocabulary::decode`] for `UNK`.
pub const UNKNOWN_GLYPH: &str = "<unk>";

const WORD_MARK: char = '\u{2581}';

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Specials {
    pub pad: u32,
    pub bos: u32,
    pub eos: u32,
    pub unk: u32,
    pub sep: u32,
}

impl Default for Specials {
    fn default() -> Self {
        Specials {
            pad: PAD_ID,
            bos: BOS_ID,
            eos: EOS_ID,
            unk: UNK_ID,
            sep: SEP_ID,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct VocabFile {
    tokens: Vec<String>,
    merges: Vec<[String; 2]>,
    specials: Specials,
}

/// Encoded ids, `BOS`-prefixed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub ids: Vec<u32>,
    pub truncated: bool,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct Vocabulary {
    tokens: Vec<String>,
    merges: Vec<(String, String)>,
    specials: Specials,
    index: HashMap<String, u32>,
    ranks: HashMap<(String, String), usize>,
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.tokens == other.tokens && self.merges == other.merges && self.specials == other.specials
    }
}

/// Lowercases and splits `text` into words and punctuation marks.
pub fn pretokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut word = String::new();
    for c in text.chars().flat_map(char::to_lowercase) {
        if c.is_alphanumeric() {
            word.push(c);
            continue;
        }
        if !word.is_empty() {
            out.push(std::mem::take(&mut word));
        }
        if !c.is_whitespace() {
            out.push(c.to_string());
        }
    }
    if !word.is_empty() {
        out.push(word);
    }
    out
}

/// Canonical form that encode/decode round-trips to.
pub fn normalize(text: &str) -> String {
    pretokenize(text).join(" ")
}

fn spell(word: &str) -> Vec<String> {
    word.chars()
        .enumerate()
        .map(|(i, c)| {
            if i == 0 {
                format!("{WORD_MARK}{c}")
            } else {
                c.to_string()
            }
        })
        .collect()
}

fn apply_merge(symbols: &mut Vec<String>, left: &str, right: &str) {
    let mut i = 0;
    while i + 1 < symbols.len() {
        if symbols[i] == left && symbols[i + 1] == right {
            let merged = format!("{left}{right}");
            symbols[i] = merged;
            symbols.remove(i + 1);
        }
        i += 1;
    }
}

/// Learns a vocabulary of at most `vocab_size` tokens from `corpus`.
///
/// Merge selection takes the most frequent adjacent pair; ties go to the
/// lexicographically smallest pair. Training stops once no pair occurs twice.
pub fn train_bpe<S: AsRef<str>>(corpus: &[S], vocab_size: usize) -> Result<Vocabulary> {
    if corpus.is_empty() {
        return Err(Error::invalid("cannot train a vocabulary on an empty corpus"));
    }
    let mut word_counts: BTreeMap<String, usize> = BTreeMap::new();
    for text in corpus {
        for w in pretokenize(text.as_ref()) {
            *word_counts.entry(w).or_default() += 1;
        }
    }
    let mut words: Vec<(Vec<String>, usize)> =
        word_counts.into_iter().map(|(w, c)| (spell(&w), c)).collect();

    let mut base: Vec<String> = words.iter().flat_map(|(s, _)| s.iter().cloned()).collect();
    base.sort();
    base.dedup();
    if vocab_size <= SPECIAL_TOKENS.len() + base.len() {
        return Err(Error::invalid(format!(
            "vocab_size {vocab_size} leaves no room for merges: {} specials + {} base symbols",
            SPECIAL_TOKENS.len(),
            base.len()
        )));
    }

    let mut tokens: Vec<String> = SPECIAL_TOKENS.iter().map(|s| s.to_string()).collect();
    tokens.extend(base);
    let mut present: std::collections::HashSet<String> = tokens.iter().cloned().collect();
    let mut merges = Vec::new();

    while tokens.len() < vocab_size {
        let mut pairs: HashMap<(&str, &str), usize> = HashMap::new();
        for (syms, count) in &words {
            for w in syms.windows(2) {
                *pairs.entry((&w[0], &w[1])).or_default() += count;
            }
        }
        let best = pairs
            .into_iter()
            .max_by(|(pa, ca), (pb, cb)| ca.cmp(cb).then_with(|| pb.cmp(pa)));
        let Some(((l, r), count)) = best else { break };
        if count < 2 {
            break;
        }
        let (l, r) = (l.to_string(), r.to_string());
        for (syms, _) in &mut words {
            apply_merge(syms, &l, &r);
        }
        let merged = format!("{l}{r}");
        if present.insert(merged.clone()) {
            tokens.push(merged);
        }
        merges.push((l, r));
    }

    Vocabulary::from_parts(tokens, merges, Specials::default())
}

impl Vocabulary {
    fn from_parts(tokens: Vec<String>, merges: Vec<(String, String)>, specials: Specials) -> Result<Self> {
        if specials != Specials::default() {
            return Err(Error::invalid("special ids must be pad=0 bos=1 eos=2 unk=3 sep=4"));
        }
        if tokens.len() < SPECIAL_TOKENS.len() || tokens[..SPECIAL_TOKENS.len()] != SPECIAL_TOKENS {
            return Err(Error::invalid("vocabulary must start with the five special tokens"));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(Error::invalid(format!("duplicate token {t:?}")));
            }
        }
        let mut ranks = HashMap::with_capacity(merges.len());
        for (rank, (l, r)) in merges.iter().enumerate() {
            for part in [l, r] {
                if !index.contains_key(part) {
                    return Err(Error::invalid(format!("merge references unknown token {part:?}")));
                }
            }
            if !index.contains_key(&format!("{l}{r}")) {
                return Err(Error::invalid(format!("merge result {l}{r:?} missing from tokens")));
            }
            ranks.entry((l.clone(), r.clone())).or_insert(rank);
        }
        Ok(Vocabulary {
            tokens,
            merges,
            specials,
            index,
            ranks,
        })
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let file: VocabFile = serde_json::from_str(json)?;
        let merges = file.merges.into_iter().map(|[l, r]| (l, r)).collect();
        Vocabulary::from_parts(file.tokens, merges, file.specials)
    }

    pub fn to_json(&self) -> String {
        let file = VocabFile {
            tokens: self.tokens.clone(),
            merges: self.merges.iter().map(|(l, r)| [l.clone(), r.clone()]).collect(),
            specials: self.specials,
        };
        serde_json::to_string_pretty(&file).expect("vocabulary serializes")
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Vocabulary::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn specials(&self) -> Specials {
        self.specials
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    fn encode_word(&self, word: &str, out: &mut Vec<u32>) {
        let mut syms = spell(word);
        loop {
            let best = syms
                .windows(2)
                .filter_map(|w| self.ranks.get(&(w[0].clone(), w[1].clone())).map(|&r| (r, w)))
                .min_by_key(|(r, _)| *r)
                .map(|(_, w)| (w[0].clone(), w[1].clone()));
            match best {
                Some((l, r)) => apply_merge(&mut syms, &l, &r),
                None => break,
            }
        }
        out.extend(syms.iter().map(|s| self.id(s).unwrap_or(self.specials.unk)));
    }

    /// Subword ids of `text` with no special tokens and no length limit.
    pub fn encode_content(&self, text: &str) -> Vec<u32> {
        let mut out = Vec::new();
        for w in pretokenize(text) {
            self.encode_word(&w, &mut out);
        }
        out
    }

    /// `BOS + content + EOS`, keeping the head when the result would exceed
    /// `max_len`. A truncated sequence is exactly `max_len` long and has no
    /// `EOS`.
    pub fn encode(&self, text: &str, max_len: usize) -> Result<TokenSequence> {
        self.wrap(self.encode_content(text), max_len)
    }

    /// Wraps pre-encoded content ids the same way [`Vocabulary::encode`] does.
    pub fn wrap(&self, content: Vec<u32>, max_len: usize) -> Result<TokenSequence> {
        if max_len < 2 {
            return Err(Error::invalid(format!("max_len {max_len} leaves no room for BOS/EOS")));
        }
        let mut ids = Vec::with_capacity((content.len() + 2).min(max_len));
        ids.push(self.specials.bos);
        if content.len() + 2 <= max_len {
            ids.extend(content);
            ids.push(self.specials.eos);
            Ok(TokenSequence { ids, truncated: false })
        } else {
            ids.extend_from_slice(&content[..max_len - 1]);
            Ok(TokenSequence { ids, truncated: true })
        }
    }

    /// Text of `ids` with special tokens dropped and `UNK` rendered as
    /// [`UNKNOWN_GLYPH`].
    pub fn decode(&self, ids: &[u32]) -> Result<String> {
        let mut text = String::new();
        for &id in ids {
            let Some(tok) = self.token(id) else {
                return Err(Error::invalid(format!(
                    "token id {id} out of range for vocabulary of {}",
                    self.len()
                )));
            };
            if id == self.specials.unk {
                text.push_str(UNKNOWN_GLYPH);
            } else if (id as usize) >= SPECIAL_TOKENS.len() {
                text.push_str(tok);
            }
        }
        Ok(text
            .replace(WORD_MARK, " ")
            .split(' ')
            .filter(|w| !w.is_empty())
            .collect::<Vec<_>>()
            .join(" "))
    }
}
