use std::collections::{BTreeSet, HashMap};

use crate::corpus::Sentence;

pub type TokenId = u32;

pub const UNK: TokenId = 0;
pub const BOS: TokenId = 1;
pub const EOS: TokenId = 2;

pub const UNK_TOKEN: &str = "<unk>";
pub const BOS_TOKEN: &str = "<s>";
pub const EOS_TOKEN: &str = "</s>";

/// Token ↔ id map for language models. Ids 0, 1 and 2 are reserved for the
/// unknown token and the sentence markers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LmVocab {
    tokens: Vec<String>,
    ids: HashMap<String, TokenId>,
}

impl Default for LmVocab {
    fn default() -> Self {
        let tokens: Vec<String> = [UNK_TOKEN, BOS_TOKEN, EOS_TOKEN]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let ids = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as TokenId))
            .collect();
        Self { tokens, ids }
    }
}

impl LmVocab {
    /// Words are numbered in lexicographic order after the reserved ids.
    pub fn from_sentences(sentences: &[Sentence]) -> Self {
        let words: BTreeSet<&str> = sentences.iter().flat_map(Sentence::iter).collect();
        let mut vocab = Self::default();
        for w in words {
            vocab.insert(w);
        }
        vocab
    }

    pub(crate) fn insert(&mut self, token: &str) -> TokenId {
        if let Some(&id) = self.ids.get(token) {
            return id;
        }
        let id = self.tokens.len() as TokenId;
        self.tokens.push(token.to_owned());
        self.ids.insert(token.to_owned(), id);
        id
    }

    /// Id of any token, markers included; unknown strings map to the unknown id.
    pub fn id(&self, token: &str) -> TokenId {
        self.ids.get(token).copied().unwrap_or(UNK)
    }

    /// Id for a token appearing in running text. Unknown words and literal
    /// sentence markers map to the unknown id.
    pub fn text_id(&self, token: &str) -> TokenId {
        match self.ids.get(token) {
            Some(&id) if id != BOS && id != EOS => id,
            _ => UNK,
        }
    }

    pub fn lookup(&self, token: &str) -> Option<TokenId> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> &str {
        &self.tokens[id as usize]
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Every id that can be predicted: all tokens except the begin marker.
    pub fn predictable(&self) -> impl Iterator<Item = TokenId> + '_ {
        (0..self.tokens.len() as TokenId).filter(|&id| id != BOS)
    }
}
