mod common;

use num_bigint::BigInt;
use proptest::prelude::*;

use symforge::expr::{Expr, Operator};
use symforge::prefix::{decode, encode, is_valid_prefix, tokens, Token, TokenSequence, Vocabulary};
use symforge::sampler::{GenProfile, Sampler};

/// Independent validity oracle: a single pass keeping the number of
/// subtrees still owed, with integers as sign + digits (no leading zero,
/// no negative zero).
fn oracle_valid(seq: &[Token]) -> bool {
    let mut owed: i64 = 1;
    let mut i = 0;
    while i < seq.len() {
        if owed == 0 {
            return false;
        }
        match seq[i] {
            Token::Op(op) => owed += op.arity() as i64 - 1,
            Token::Sym(_) => owed -= 1,
            Token::IntPos | Token::IntNeg => {
                let start = i + 1;
                let mut end = start;
                while end < seq.len() && matches!(seq[end], Token::Digit(_)) {
                    end += 1;
                }
                let digits = &seq[start..end];
                if digits.is_empty() {
                    return false;
                }
                if digits.len() > 1 && digits[0] == Token::Digit(0) {
                    return false;
                }
                if seq[i] == Token::IntNeg && digits == [Token::Digit(0)] {
                    return false;
                }
                owed -= 1;
                i = end;
                continue;
            }
            _ => return false,
        }
        i += 1;
    }
    owed == 0
}

fn any_token() -> impl Strategy<Value = Token> {
    let vocab = Vocabulary::build();
    let all: Vec<Token> = vocab.tokens().to_vec();
    proptest::sample::select(all)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn round_trip_sampled(seed in any::<u64>(), preset in 0usize..4) {
        let p = GenProfile::preset(common::PRESETS[preset]).unwrap().with_seed(seed);
        let e = Sampler::new(p).unwrap().sample().unwrap();
        prop_assert_eq!(decode(&encode(&e)).unwrap(), e);
    }

    #[test]
    fn validity_matches_oracle(seq in proptest::collection::vec(any_token(), 0..24)) {
        prop_assert_eq!(is_valid_prefix(&seq), oracle_valid(&seq));
        prop_assert_eq!(decode(&TokenSequence(seq.clone())).is_ok(), oracle_valid(&seq));
    }

    #[test]
    fn integers_round_trip(v in any::<i128>()) {
        let e = Expr::add(Expr::x(), Expr::Int(BigInt::from(v)));
        prop_assert_eq!(decode(&encode(&e)).unwrap(), e);
    }

    #[test]
    fn text_form_round_trips(seed in any::<u64>()) {
        let e = Sampler::new(GenProfile::uniform().with_seed(seed)).unwrap().sample().unwrap();
        let text = encode(&e).to_string();
        prop_assert_eq!(decode(&tokens(&text)).unwrap(), e);
    }
}

#[test]
fn round_trip_ten_thousand() {
    for e in common::corpus(10_000, 99) {
        assert_eq!(decode(&encode(&e)).unwrap(), e);
    }
}

#[test]
fn valid_prefixes_from_sampled_trees_truncated_are_invalid() {
    for e in common::corpus(500, 5) {
        let seq = encode(&e).0;
        assert!(is_valid_prefix(&seq));
        // a proper prefix of a complete tree never closes it
        for cut in 1..seq.len() {
            let head = &seq[..cut];
            assert_eq!(is_valid_prefix(head), oracle_valid(head));
        }
    }
}

#[test]
fn vocabulary_file_round_trip() {
    let v = Vocabulary::build();
    assert_eq!(v.len(), 4 + Operator::all().count() + 9 + 2 + 10);
    let back = Vocabulary::from_text(&v.to_text()).unwrap();
    for (i, t) in v.tokens().iter().enumerate() {
        assert_eq!(back.id(*t), i as u32);
        assert_eq!(v.token(i as u32), *t);
    }
    assert!(Vocabulary::from_text("x\n").is_err());
}
