//! Prefix-order token sequences and the token vocabulary.
//!
//! An expression is serialised root first, children left to right.
//! Integers become a sign token (`INT+` / `INT-`) followed by their decimal
//! digits, most significant first. Since every operator has a fixed arity
//! the sequence needs no brackets.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, Sign};
use thiserror::Error;

use crate::expr::{Expr, Operator, Symbol};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Token {
    Pad,
    Bos,
    Eos,
    Unk,
    Op(Operator),
    Sym(Symbol),
    IntPos,
    IntNeg,
    Digit(u8),
}

impl Token {
    pub fn text(&self) -> String {
        match self {
            Token::Pad => "<PAD>".into(),
            Token::Bos => "<BOS>".into(),
            Token::Eos => "<EOS>".into(),
            Token::Unk => "<UNK>".into(),
            Token::Op(op) => op.name().into(),
            Token::Sym(s) => s.name().into(),
            Token::IntPos => "INT+".into(),
            Token::IntNeg => "INT-".into(),
            Token::Digit(d) => d.to_string(),
        }
    }

    /// Parses one token's text form. Unknown words map to `Unk` so that
    /// arbitrary model output can still be embedded and then rejected by
    /// [`decode`].
    pub fn parse(word: &str) -> Token {
        match word {
            "<PAD>" => Token::Pad,
            "<BOS>" => Token::Bos,
            "<EOS>" => Token::Eos,
            "INT+" => Token::IntPos,
            "INT-" => Token::IntNeg,
            w if w.len() == 1 && w.as_bytes()[0].is_ascii_digit() => Token::Digit(w.as_bytes()[0] - b'0'),
            w => Operator::from_name(w)
                .map(Token::Op)
                .or_else(|| Symbol::from_name(w).map(Token::Sym))
                .unwrap_or(Token::Unk),
        }
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct TokenSequence(pub Vec<Token>);

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn tokens(&self) -> &[Token] {
        &self.0
    }
}

// Space-joined ASCII text form.
impl fmt::Display for TokenSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            f.write_str(&t.text())?;
        }
        Ok(())
    }
}

impl FromStr for TokenSequence {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(TokenSequence(s.split_whitespace().map(Token::parse).collect()))
    }
}

pub fn encode(e: &Expr) -> TokenSequence {
    let mut out = Vec::new();
    encode_into(e, &mut out);
    TokenSequence(out)
}

fn encode_into(e: &Expr, out: &mut Vec<Token>) {
    match e {
        Expr::Sym(s) => out.push(Token::Sym(*s)),
        Expr::Int(v) => {
            out.push(if v.sign() == Sign::Minus {
                Token::IntNeg
            } else {
                Token::IntPos
            });
            out.extend(
                v.magnitude()
                    .to_str_radix(10)
                    .bytes()
                    .map(|b| Token::Digit(b - b'0')),
            );
        }
        Expr::Unary(op, a) => {
            out.push(Token::Op(Operator::Unary(*op)));
            encode_into(a, out);
        }
        Expr::Binary(op, a, b) => {
            out.push(Token::Op(Operator::Binary(*op)));
            encode_into(a, out);
            encode_into(b, out);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MalformedReason {
    MissingOperand,
    TrailingTokens,
    DanglingSign,
    UnexpectedDigit,
    LeadingZero,
    NegativeZero,
    UnknownToken,
    TooDeep,
}

/// Nesting bound for [`decode`], so arbitrary model output cannot exhaust
/// the stack.
pub const MAX_DECODE_DEPTH: usize = 2048;

impl fmt::Display for MalformedReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            MalformedReason::MissingOperand => "missing operand",
            MalformedReason::TrailingTokens => "trailing tokens",
            MalformedReason::DanglingSign => "sign token without digits",
            MalformedReason::UnexpectedDigit => "digit outside an integer",
            MalformedReason::LeadingZero => "integer with leading zero",
            MalformedReason::NegativeZero => "negative zero",
            MalformedReason::UnknownToken => "unknown token",
            MalformedReason::TooDeep => "nesting too deep",
        };
        f.write_str(s)
    }
}

/// `position` is the index of the offending token, or the sequence length
/// when the sequence ended too early.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed sequence at position {position}: {reason}")]
pub struct DecodeError {
    pub position: usize,
    pub reason: MalformedReason,
}

struct Decoder<'a> {
    tokens: &'a [Token],
    pos: usize,
    depth: usize,
}

impl Decoder<'_> {
    fn fail<T>(&self, position: usize, reason: MalformedReason) -> Result<T, DecodeError> {
        Err(DecodeError { position, reason })
    }

    fn integer(&mut self, negative: bool) -> Result<Expr, DecodeError> {
        let start = self.pos;
        let mut digits = Vec::new();
        while let Some(Token::Digit(d)) = self.tokens.get(self.pos) {
            digits.push(*d);
            self.pos += 1;
        }
        if digits.is_empty() {
            return self.fail(start - 1, MalformedReason::DanglingSign);
        }
        if digits.len() > 1 && digits[0] == 0 {
            return self.fail(start, MalformedReason::LeadingZero);
        }
        if negative && digits == [0] {
            return self.fail(start - 1, MalformedReason::NegativeZero);
        }
        let mag = BigInt::from_radix_be(Sign::Plus, &digits, 10).expect("decimal digits");
        Ok(Expr::Int(if negative { -mag } else { mag }))
    }

    fn expr(&mut self) -> Result<Expr, DecodeError> {
        if self.depth >= MAX_DECODE_DEPTH {
            return self.fail(self.pos, MalformedReason::TooDeep);
        }
        self.depth += 1;
        let out = self.expr_inner();
        self.depth -= 1;
        out
    }

    fn expr_inner(&mut self) -> Result<Expr, DecodeError> {
        let Some(tok) = self.tokens.get(self.pos).copied() else {
            return self.fail(self.tokens.len(), MalformedReason::MissingOperand);
        };
        let at = self.pos;
        self.pos += 1;
        match tok {
            Token::Sym(s) => Ok(Expr::Sym(s)),
            Token::IntPos => self.integer(false),
            Token::IntNeg => self.integer(true),
            Token::Digit(_) => self.fail(at, MalformedReason::UnexpectedDigit),
            Token::Op(Operator::Unary(op)) => Ok(Expr::unary(op, self.expr()?)),
            Token::Op(Operator::Binary(op)) => {
                let a = self.expr()?;
                let b = self.expr()?;
                Ok(Expr::binary(op, a, b))
            }
            Token::Pad | Token::Bos | Token::Eos | Token::Unk => self.fail(at, MalformedReason::UnknownToken),
        }
    }
}

/// Inverse of [`encode`]; rejects anything `encode` cannot produce.
pub fn decode(t: &TokenSequence) -> Result<Expr, DecodeError> {
    decode_tokens(t.tokens())
}

pub fn decode_tokens(tokens: &[Token]) -> Result<Expr, DecodeError> {
    let mut d = Decoder {
        tokens,
        pos: 0,
        depth: 0,
    };
    let e = d.expr()?;
    if d.pos != tokens.len() {
        return d.fail(d.pos, MalformedReason::TrailingTokens);
    }
    Ok(e)
}

/// Checks the prefix arity discipline without building a tree: a counter of
/// needed operands starts at 1, each operator adds `arity - 1`, each
/// complete leaf subtracts 1, and it must reach 0 exactly at the last token.
pub fn is_valid_prefix(tokens: &[Token]) -> bool {
    let mut need: usize = 1;
    let mut i = 0;
    while i < tokens.len() {
        if need == 0 {
            return false;
        }
        match tokens[i] {
            Token::Op(op) => need += op.arity() - 1,
            Token::Sym(_) => need -= 1,
            Token::IntPos | Token::IntNeg => {
                let start = i + 1;
                let mut end = start;
                while let Some(Token::Digit(_)) = tokens.get(end) {
                    end += 1;
                }
                let digits = &tokens[start..end];
                let canonical = match digits {
                    [] => false,
                    [Token::Digit(0)] => tokens[i] == Token::IntPos,
                    [Token::Digit(0), ..] => false,
                    _ => true,
                };
                if !canonical {
                    return false;
                }
                need -= 1;
                i = end;
                continue;
            }
            _ => return false,
        }
        i += 1;
    }
    need == 0
}

/// Bijective token <-> id table. Ids are dense: the four reserved tokens,
/// then operators in declared order, leaf symbols, the two sign tokens and
/// the digits 0-9.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    tokens: Vec<Token>,
    ids: HashMap<Token, u32>,
}

pub const PAD_ID: u32 = 0;
pub const BOS_ID: u32 = 1;
pub const EOS_ID: u32 = 2;
pub const UNK_ID: u32 = 3;

#[derive(Debug, Error)]
pub enum VocabularyError {
    #[error("line {line}: expected {expected:?}, found {found:?}")]
    Mismatch {
        line: usize,
        expected: String,
        found: String,
    },
    #[error("vocabulary has {found} entries, expected {expected}")]
    Length { expected: usize, found: usize },
}

impl Vocabulary {
    pub fn build() -> Vocabulary {
        let mut tokens = vec![Token::Pad, Token::Bos, Token::Eos, Token::Unk];
        tokens.extend(Operator::all().map(Token::Op));
        tokens.extend(Symbol::ALL.into_iter().map(Token::Sym));
        tokens.push(Token::IntPos);
        tokens.push(Token::IntNeg);
        tokens.extend((0..10).map(Token::Digit));
        let ids = tokens.iter().enumerate().map(|(i, t)| (*t, i as u32)).collect();
        Vocabulary { tokens, ids }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, t: Token) -> u32 {
        self.ids.get(&t).copied().unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: u32) -> Token {
        self.tokens.get(id as usize).copied().unwrap_or(Token::Unk)
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn ids_of(&self, seq: &TokenSequence) -> Vec<u32> {
        seq.tokens().iter().map(|t| self.id(*t)).collect()
    }

    /// One token per line; the zero-based line number is the id.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for t in &self.tokens {
            s.push_str(&t.text());
            s.push('\n');
        }
        s
    }

    /// Reads a vocabulary file and checks it matches this build's table.
    pub fn from_text(text: &str) -> Result<Vocabulary, VocabularyError> {
        let v = Vocabulary::build();
        let lines: Vec<&str> = text.lines().collect();
        if lines.len() != v.len() {
            return Err(VocabularyError::Length {
                expected: v.len(),
                found: lines.len(),
            });
        }
        for (i, (line, t)) in lines.iter().zip(&v.tokens).enumerate() {
            if *line != t.text() {
                return Err(VocabularyError::Mismatch {
                    line: i,
                    expected: t.text(),
                    found: (*line).to_string(),
                });
            }
        }
        Ok(v)
    }
}

impl Default for Vocabulary {
    fn default() -> Self {
        Vocabulary::build()
    }
}

/// Convenience for building sequences from their text form in tests and
/// tools.
pub fn tokens(text: &str) -> TokenSequence {
    text.parse().expect("infallible")
}
