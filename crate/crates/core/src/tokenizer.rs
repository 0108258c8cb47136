//! Byte decoding and punctuation-aware tokenization.
//!
//! Files are read as raw bytes. ASCII bytes map to themselves and every
//! other byte maps to [`NON_ASCII`]. A token is either a single punctuation
//! character or a maximal run of characters that are neither punctuation
//! nor whitespace. `_` counts as an identifier character.

/// Placeholder character for every byte >= 0x80.
pub const NON_ASCII: char = '\u{FFFD}';

/// Map each byte to one character.
pub fn decode(content: &[u8]) -> String {
    content
        .iter()
        .map(|&b| if b.is_ascii() { b as char } else { NON_ASCII })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CharClass {
    Space,
    Punct,
    Word,
}

fn classify(c: char) -> CharClass {
    if c.is_ascii() {
        if c == '_' || c.is_ascii_alphanumeric() {
            CharClass::Word
        } else if c.is_ascii_punctuation() {
            CharClass::Punct
        } else {
            // space, tab, LF, CR and every other control character
            CharClass::Space
        }
    } else {
        // the placeholder and any other non-ASCII input
        CharClass::Punct
    }
}

/// True for characters that always form a token of their own.
pub fn is_punctuation(c: char) -> bool {
    classify(c) == CharClass::Punct
}

/// Ordered tokens of one file.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenStream {
    pub tokens: Vec<String>,
    pub source_digest: Option<String>,
}

impl TokenStream {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn with_digest(mut self, digest: impl Into<String>) -> Self {
        self.source_digest = Some(digest.into());
        self
    }
}

/// Split `text` into tokens. Case is preserved.
pub fn tokenize(text: &str) -> TokenStream {
    let mut tokens = Vec::new();
    let mut word = String::new();
    for c in text.chars() {
        match classify(c) {
            CharClass::Word => word.push(c),
            class => {
                if !word.is_empty() {
                    tokens.push(std::mem::take(&mut word));
                }
                if class == CharClass::Punct {
                    tokens.push(c.to_string());
                }
            }
        }
    }
    if !word.is_empty() {
        tokens.push(word);
    }
    TokenStream {
        tokens,
        source_digest: None,
    }
}

/// Decode then tokenize.
pub fn tokenize_bytes(content: &[u8]) -> TokenStream {
    tokenize(&decode(content))
}

/// Token counts removed from the start and end of a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Trim {
    pub head: usize,
    pub tail: usize,
}

impl Trim {
    pub const NONE: Trim = Trim { head: 0, tail: 0 };

    pub fn new(head: usize, tail: usize) -> Self {
        Trim { head, tail }
    }

    /// The kept window of a slice of length `len`.
    pub fn window<T>(self, items: &[T]) -> &[T] {
        if self.head.saturating_add(self.tail) >= items.len() {
            return &[];
        }
        &items[self.head..items.len() - self.tail]
    }
}

impl Default for Trim {
    fn default() -> Self {
        Trim { head: 10, tail: 10 }
    }
}

/// Drop up to `trim.head` leading and `trim.tail` trailing tokens.
pub fn trim_affixes(stream: TokenStream, trim: Trim) -> TokenStream {
    let TokenStream {
        mut tokens,
        source_digest,
    } = stream;
    if trim.head.saturating_add(trim.tail) >= tokens.len() {
        tokens.clear();
    } else {
        tokens.truncate(tokens.len() - trim.tail);
        tokens.drain(..trim.head);
    }
    TokenStream {
        tokens,
        source_digest,
    }
}
