//! Recursive-descent parser for the textual formula syntax.
//!
//! ```text
//! phi   := until
//! until := or ("U" interval until)?
//! or    := and ("or" and)*
//! and   := unary ("and" unary)*
//! unary := "not" unary | ("F" | "G") interval unary | atom
//! atom  := "true" | "(" phi ")" | "x"N cmp num | "abs" "(" "x"N ")" cmp num
//! cmp   := "<" | "<=" | ">" | ">="
//! ```

use super::ast::{Comparator, Formula, Interval};
use super::StlError;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Num(f64),
    Cmp(Comparator),
    LParen,
    RParen,
    LBrack,
    RBrack,
    Comma,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Word(w) => format!("{w:?}"),
            Tok::Num(x) => format!("number {x}"),
            Tok::Cmp(c) => format!("{:?}", c.symbol()),
            Tok::LParen => "\"(\"".into(),
            Tok::RParen => "\")\"".into(),
            Tok::LBrack => "\"[\"".into(),
            Tok::RBrack => "\"]\"".into(),
            Tok::Comma => "\",\"".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, StlError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'(' => out.push((Tok::LParen, start)),
            b')' => out.push((Tok::RParen, start)),
            b'[' => out.push((Tok::LBrack, start)),
            b']' => out.push((Tok::RBrack, start)),
            b',' => out.push((Tok::Comma, start)),
            b'<' | b'>' => {
                let eq = bytes.get(i + 1) == Some(&b'=');
                let cmp = match (c, eq) {
                    (b'<', false) => Comparator::Lt,
                    (b'<', true) => Comparator::Le,
                    (_, false) => Comparator::Gt,
                    (_, true) => Comparator::Ge,
                };
                if eq {
                    i += 1;
                }
                out.push((Tok::Cmp(cmp), start));
            }
            b'0'..=b'9' | b'.' | b'-' | b'+' => {
                i += 1;
                while i < bytes.len() {
                    let d = bytes[i];
                    let exp_sign = (d == b'-' || d == b'+') && matches!(bytes[i - 1], b'e' | b'E');
                    if d.is_ascii_digit() || d == b'.' || d == b'e' || d == b'E' || exp_sign {
                        i += 1;
                    } else {
                        break;
                    }
                }
                let lit = &text[start..i];
                let x = lit.parse::<f64>().map_err(|_| StlError::Parse {
                    position: start,
                    found: format!("{lit:?}"),
                    expected: vec!["number".into()],
                })?;
                out.push((Tok::Num(x), start));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Word(text[start..i].to_string()), start));
                continue;
            }
            _ => {
                let ch = text[start..].chars().next().unwrap_or('?');
                return Err(StlError::Parse {
                    position: start,
                    found: format!("{ch:?}"),
                    expected: vec!["formula".into()],
                });
            }
        }
        i += 1;
    }
    out.push((Tok::Eof, text.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

fn signal_index(word: &str) -> Option<usize> {
    word.strip_prefix('x')
        .filter(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))
        .and_then(|d| d.parse().ok())
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn fail<T>(&self, expected: &[&str]) -> Result<T, StlError> {
        Err(StlError::Parse {
            position: self.offset(),
            found: self.peek().describe(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        })
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Tok::Word(x) if x == w)
    }

    fn expect(&mut self, tok: Tok, label: &str) -> Result<(), StlError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            self.fail(&[label])
        }
    }

    fn number(&mut self) -> Result<f64, StlError> {
        match self.peek() {
            Tok::Num(x) => {
                let x = *x;
                self.bump();
                Ok(x)
            }
            _ => self.fail(&["number"]),
        }
    }

    fn interval(&mut self) -> Result<Interval, StlError> {
        self.expect(Tok::LBrack, "\"[\"")?;
        let a = self.number()?;
        self.expect(Tok::Comma, "\",\"")?;
        let b = self.number()?;
        self.expect(Tok::RBrack, "\"]\"")?;
        Interval::new(a, b)
    }

    fn until(&mut self) -> Result<Formula, StlError> {
        let lhs = self.or()?;
        if self.is_word("U") {
            self.bump();
            let i = self.interval()?;
            let rhs = self.until()?;
            return Ok(Formula::until(i, lhs, rhs));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Formula, StlError> {
        let mut lhs = self.and()?;
        while self.is_word("or") {
            self.bump();
            lhs = Formula::or(lhs, self.and()?);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Formula, StlError> {
        let mut lhs = self.unary()?;
        while self.is_word("and") {
            self.bump();
            lhs = Formula::and(lhs, self.unary()?);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula, StlError> {
        if self.is_word("not") {
            self.bump();
            return Ok(Formula::not(self.unary()?));
        }
        if self.is_word("F") || self.is_word("G") {
            let eventually = self.is_word("F");
            self.bump();
            let i = self.interval()?;
            let body = self.unary()?;
            return Ok(if eventually { Formula::eventually(i, body) } else { Formula::always(i, body) });
        }
        self.atom()
    }

    fn comparison(&mut self) -> Result<(Comparator, f64), StlError> {
        let cmp = match self.peek() {
            Tok::Cmp(c) => *c,
            _ => return self.fail(&["\"<\"", "\"<=\"", "\">\"", "\">=\""]),
        };
        self.bump();
        Ok((cmp, self.number()?))
    }

    fn signal_ref(&mut self) -> Result<usize, StlError> {
        if let Tok::Word(w) = self.peek() {
            if let Some(i) = signal_index(w) {
                self.bump();
                return Ok(i);
            }
        }
        self.fail(&["signal reference x<N>"])
    }

    fn atom(&mut self) -> Result<Formula, StlError> {
        const ATOM: &[&str] = &["\"true\"", "\"(\"", "x<N>", "\"abs\"", "\"not\"", "\"F\"", "\"G\""];
        match self.peek().clone() {
            Tok::LParen => {
                self.bump();
                let inner = self.until()?;
                self.expect(Tok::RParen, "\")\"")?;
                Ok(inner)
            }
            Tok::Word(w) if w == "true" => {
                self.bump();
                Ok(Formula::True)
            }
            Tok::Word(w) if w == "abs" => {
                self.bump();
                self.expect(Tok::LParen, "\"(\"")?;
                let index = self.signal_ref()?;
                self.expect(Tok::RParen, "\")\"")?;
                let (cmp, c) = self.comparison()?;
                let p = |cmp, c| Formula::pred(index, cmp, c);
                Ok(match cmp {
                    Comparator::Lt => Formula::and(p(Comparator::Lt, c), p(Comparator::Gt, -c)),
                    Comparator::Le => Formula::and(p(Comparator::Le, c), p(Comparator::Ge, -c)),
                    Comparator::Gt => Formula::or(p(Comparator::Gt, c), p(Comparator::Lt, -c)),
                    Comparator::Ge => Formula::or(p(Comparator::Ge, c), p(Comparator::Le, -c)),
                })
            }
            Tok::Word(w) if signal_index(&w).is_some() => {
                let index = self.signal_ref()?;
                let (cmp, threshold) = self.comparison()?;
                Ok(Formula::pred(index, cmp, threshold))
            }
            _ => self.fail(ATOM),
        }
    }
}

pub fn parse(text: &str) -> Result<Formula, StlError> {
    let mut p = Parser { toks: lex(text)?, pos: 0 };
    let phi = p.until()?;
    if *p.peek() != Tok::Eof {
        return p.fail(&["\"and\"", "\"or\"", "\"U\"", "end of input"]);
    }
    Ok(phi)
}
