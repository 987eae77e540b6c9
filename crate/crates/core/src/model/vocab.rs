//! Token inventory with the reserved speaker-change and end-of-sequence symbols.
//!
//! File format: one token per line. Leading `#!` lines form the header and
//! declare the reserved symbols and the word-boundary marker:
//!
//! ```text
//! #! sc <sc>
//! #! eos <eos>
//! #! word-boundary ▁
//! <eos>
//! <sc>
//! ▁hello
//! ```

use std::collections::HashMap;

use crate::error::{bail, Result};

pub type TokenId = usize;

#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
    sc: TokenId,
    eos: TokenId,
    word_boundary: Option<String>,
}

/// The two structural symbols of a serialized transcript.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Specials {
    pub sc: TokenId,
    pub eos: TokenId,
}

impl Vocabulary {
    pub fn new(tokens: Vec<String>, sc: &str, eos: &str, word_boundary: Option<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                bail!(Config, "duplicate token {t:?} in vocabulary");
            }
        }
        let sc = *index.get(sc).ok_or_else(|| crate::Error::Config(format!("speaker-change symbol {sc:?} not in vocabulary")))?;
        let eos = *index.get(eos).ok_or_else(|| crate::Error::Config(format!("end symbol {eos:?} not in vocabulary")))?;
        if sc == eos {
            bail!(Config, "speaker-change and end symbols must differ");
        }
        Ok(Self { tokens, index, sc, eos, word_boundary })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn sc(&self) -> TokenId {
        self.sc
    }

    pub fn eos(&self) -> TokenId {
        self.eos
    }

    /// Decoding starts from the end symbol, as in most attention decoders.
    pub fn sos(&self) -> TokenId {
        self.eos
    }

    pub fn specials(&self) -> Specials {
        Specials { sc: self.sc, eos: self.eos }
    }

    pub fn word_boundary(&self) -> Option<&str> {
        self.word_boundary.as_deref()
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn is_content(&self, id: TokenId) -> bool {
        id != self.sc && id != self.eos
    }

    /// Joins subword tokens into words. Reserved symbols are skipped; words are
    /// split at the declared boundary marker, or at token boundaries when the
    /// vocabulary declares none.
    pub fn detokenize(&self, ids: &[TokenId]) -> Vec<String> {
        let pieces = ids.iter().filter(|&&i| self.is_content(i)).filter_map(|&i| self.token(i));
        match &self.word_boundary {
            Some(marker) => {
                let joined: String = pieces.collect();
                joined.split(marker.as_str()).filter(|w| !w.is_empty()).map(str::to_owned).collect()
            }
            None => pieces.map(str::to_owned).collect(),
        }
    }

    pub fn to_text(&self, ids: &[TokenId]) -> String {
        self.detokenize(ids).join(" ")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut sc = None;
        let mut eos = None;
        let mut boundary = None;
        let mut tokens = Vec::new();
        let mut in_header = true;
        for (lineno, line) in text.lines().enumerate() {
            if in_header {
                if let Some(rest) = line.strip_prefix("#!") {
                    let mut parts = rest.split_whitespace();
                    match (parts.next(), parts.next()) {
                        (Some("sc"), Some(v)) => sc = Some(v.to_owned()),
                        (Some("eos"), Some(v)) => eos = Some(v.to_owned()),
                        (Some("word-boundary"), Some(v)) => boundary = Some(v.to_owned()),
                        _ => bail!(Schema, "line {}: unrecognised vocabulary header {line:?}", lineno + 1),
                    }
                    continue;
                }
                in_header = false;
            }
            if line.is_empty() {
                continue;
            }
            tokens.push(line.to_owned());
        }
        let sc = sc.ok_or_else(|| crate::Error::Schema("vocabulary header lacks `#! sc`".into()))?;
        let eos = eos.ok_or_else(|| crate::Error::Schema("vocabulary header lacks `#! eos`".into()))?;
        Self::new(tokens, &sc, &eos, boundary)
    }

    pub fn render(&self) -> String {
        let mut out = format!("#! sc {}\n#! eos {}\n", self.tokens[self.sc], self.tokens[self.eos]);
        if let Some(b) = &self.word_boundary {
            out.push_str(&format!("#! word-boundary {b}\n"));
        }
        for t in &self.tokens {
            out.push_str(t);
            out.push('\n');
        }
        out
    }
}
