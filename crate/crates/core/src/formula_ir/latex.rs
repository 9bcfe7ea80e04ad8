//! Front-end for a small LaTeX subset, producing the same operator trees as
//! the s-expression reader.
//!
//! Supported: infix `+ - * / = ^ _`, `\frac{}{}`, `\sqrt{}`, `( )` and `{ }`
//! grouping, single-letter identifiers, decimal numbers, and the functions
//! `\sin \cos \log \exp \sum \int`. Juxtaposition is multiplication (`*`).
//! Precedence, tightest first: scripts (`^`, `_`), implicit multiplication,
//! `* /`, `+ -`, `=`. Anything else is rejected with
//! [`IrError::Unsupported`] naming the offending token.
//!
//! Function forms:
//! - `\sin x`, `\log_2 x`, `\sin^2 x` become `(sin x)`, `(log 2 x)`,
//!   `(^ (sin x) 2)`.
//! - `\sum_{i=1}^{n} x` becomes `(sum (= i 1) n x)`; limits are optional.

use super::opt::OptTree;
use super::IrError;

const FUNCTIONS: &[&str] = &["sin", "cos", "log", "exp", "sum", "int"];
const BIG_OPERATORS: &[&str] = &["sum", "int"];

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(String),
    Ident(char),
    Op(char),
    LParen,
    RParen,
    LBrace,
    RBrace,
    Frac,
    Sqrt,
    Func(&'static str),
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, IrError> {
    let mut out = Vec::new();
    let bytes = src.as_bytes();
    let mut i = 0;
    while i < src.len() {
        let ch = src[i..].chars().next().expect("in bounds");
        let start = i;
        if ch.is_whitespace() {
            i += ch.len_utf8();
            continue;
        }
        if ch.is_ascii_digit() {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i + 1 < bytes.len() && bytes[i] == b'.' && bytes[i + 1].is_ascii_digit() {
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
            out.push((start, Tok::Num(src[start..i].to_string())));
            continue;
        }
        if ch.is_ascii_alphabetic() {
            out.push((start, Tok::Ident(ch)));
            i += 1;
            continue;
        }
        if ch == '\\' {
            i += 1;
            while i < bytes.len() && bytes[i].is_ascii_alphabetic() {
                i += 1;
            }
            let name = &src[start + 1..i];
            let tok = match name {
                "frac" => Tok::Frac,
                "sqrt" => Tok::Sqrt,
                _ => match FUNCTIONS.iter().find(|f| **f == name) {
                    Some(f) => Tok::Func(f),
                    None => {
                        let token = if name.is_empty() {
                            src[start..].chars().take(2).collect()
                        } else {
                            src[start..i].to_string()
                        };
                        return Err(IrError::Unsupported { token, offset: start });
                    }
                },
            };
            out.push((start, tok));
            continue;
        }
        let tok = match ch {
            '+' | '-' | '*' | '/' | '=' | '^' | '_' => Tok::Op(ch),
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            _ => {
                return Err(IrError::Unsupported {
                    token: ch.to_string(),
                    offset: start,
                })
            }
        };
        out.push((start, tok));
        i += ch.len_utf8();
    }
    Ok(out)
}

/// Parses a formula written in the supported LaTeX subset.
pub fn parse_latex_subset(src: &str) -> Result<OptTree, IrError> {
    let toks = lex(src)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end: src.len(),
    };
    if p.toks.is_empty() {
        return Err(IrError::parse(src.len(), "empty input"));
    }
    let t = p.expr(0)?;
    if let Some((off, _)) = p.toks.get(p.pos) {
        return Err(IrError::parse(*off, "unexpected token"));
    }
    Ok(t)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

const IMPLICIT_BP: (u8, u8) = (7, 8);
const UNARY_BP: u8 = 7;

fn infix_bp(op: char) -> Option<(u8, u8)> {
    Some(match op {
        '=' => (1, 2),
        '+' | '-' => (3, 4),
        '*' | '/' => (5, 6),
        '^' | '_' => (10, 9),
        _ => return None,
    })
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(o, _)| *o)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), IrError> {
        let off = self.offset();
        match self.next() {
            Some(t) if t == want => Ok(()),
            _ => Err(IrError::parse(off, format!("expected {what}"))),
        }
    }

    fn starts_primary(t: &Tok) -> bool {
        matches!(
            t,
            Tok::Num(_) | Tok::Ident(_) | Tok::LParen | Tok::LBrace | Tok::Frac | Tok::Sqrt | Tok::Func(_)
        )
    }

    fn expr(&mut self, min_bp: u8) -> Result<OptTree, IrError> {
        let mut lhs = self.prefix()?;
        while let Some(t) = self.peek() {
            if let Tok::Op(op) = *t {
                let Some((l_bp, r_bp)) = infix_bp(op) else { break };
                if l_bp < min_bp {
                    break;
                }
                self.pos += 1;
                let rhs = if op == '^' || op == '_' {
                    self.script_arg()?
                } else {
                    self.expr(r_bp)?
                };
                lhs = OptTree::apply(op.to_string(), vec![lhs, rhs]);
            } else if Self::starts_primary(t) {
                if IMPLICIT_BP.0 < min_bp {
                    break;
                }
                let rhs = self.expr(IMPLICIT_BP.1)?;
                lhs = OptTree::apply("*", vec![lhs, rhs]);
            } else {
                break;
            }
        }
        Ok(lhs)
    }

    fn prefix(&mut self) -> Result<OptTree, IrError> {
        match self.peek() {
            Some(Tok::Op(op @ ('-' | '+'))) => {
                let op = *op;
                self.pos += 1;
                let arg = self.expr(UNARY_BP)?;
                Ok(OptTree::apply(op.to_string(), vec![arg]))
            }
            _ => self.primary(),
        }
    }

    fn group(&mut self, open: Tok, close: Tok, what: &str) -> Result<OptTree, IrError> {
        self.expect(open, what)?;
        let e = self.expr(0)?;
        self.expect(close, "closing delimiter")?;
        Ok(e)
    }

    fn primary(&mut self) -> Result<OptTree, IrError> {
        let off = self.offset();
        match self.next() {
            Some(Tok::Num(n)) => Ok(OptTree::leaf(n)),
            Some(Tok::Ident(c)) => Ok(OptTree::leaf(c.to_string())),
            Some(Tok::LParen) => {
                let e = self.expr(0)?;
                self.expect(Tok::RParen, "')'")?;
                Ok(e)
            }
            Some(Tok::LBrace) => {
                let e = self.expr(0)?;
                self.expect(Tok::RBrace, "'}'")?;
                Ok(e)
            }
            Some(Tok::Frac) => {
                let num = self.group(Tok::LBrace, Tok::RBrace, "'{' after \\frac")?;
                let den = self.group(Tok::LBrace, Tok::RBrace, "second '{' after \\frac")?;
                Ok(OptTree::apply("/", vec![num, den]))
            }
            Some(Tok::Sqrt) => {
                let arg = self.group(Tok::LBrace, Tok::RBrace, "'{' after \\sqrt")?;
                Ok(OptTree::apply("sqrt", vec![arg]))
            }
            Some(Tok::Func(name)) => self.function(name),
            Some(_) => Err(IrError::parse(off, "expected an operand")),
            None => Err(IrError::parse(off, "unexpected end of input")),
        }
    }

    fn function(&mut self, name: &'static str) -> Result<OptTree, IrError> {
        let mut lower = None;
        let mut upper = None;
        loop {
            match self.peek() {
                Some(Tok::Op('_')) if lower.is_none() => {
                    self.pos += 1;
                    lower = Some(self.script_arg()?);
                }
                Some(Tok::Op('^')) if upper.is_none() => {
                    self.pos += 1;
                    upper = Some(self.script_arg()?);
                }
                _ => break,
            }
        }
        let body = self.expr(UNARY_BP)?;
        if BIG_OPERATORS.contains(&name) {
            let mut args: Vec<OptTree> = lower.into_iter().chain(upper).collect();
            args.push(body);
            return Ok(OptTree::apply(name, args));
        }
        let mut args: Vec<OptTree> = lower.into_iter().collect();
        args.push(body);
        let applied = OptTree::apply(name, args);
        Ok(match upper {
            Some(pow) => OptTree::apply("^", vec![applied, pow]),
            None => applied,
        })
    }

    /// Script argument: a braced group, one letter, one digit, or a command.
    fn script_arg(&mut self) -> Result<OptTree, IrError> {
        let off = self.offset();
        match self.peek().cloned() {
            Some(Tok::Num(n)) => {
                // `x^23` means x^2 followed by 3.
                let mut chars = n.chars();
                let first = chars.next().expect("non-empty number");
                let rest: String = chars.collect();
                if rest.is_empty() {
                    self.pos += 1;
                } else {
                    self.toks[self.pos] = (off + 1, Tok::Num(rest));
                }
                Ok(OptTree::leaf(first.to_string()))
            }
            Some(Tok::Ident(_) | Tok::LBrace | Tok::Frac | Tok::Sqrt | Tok::Func(_)) => self.primary(),
            Some(_) => Err(IrError::parse(off, "invalid script argument")),
            None => Err(IrError::parse(off, "unexpected end of input")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula_ir::parse_opt_sexpr;

    fn sx(latex: &str) -> String {
        parse_latex_subset(latex).unwrap().to_sexpr()
    }

    #[test]
    fn shared_difference_formula_matches_sexpr_form() {
        let t = parse_latex_subset(r"\frac{1}{a-b}+(a-b)^2=1").unwrap();
        let s = parse_opt_sexpr("(= (+ (/ 1 (- a b)) (^ (- a b) 2)) 1)").unwrap();
        assert_eq!(t, s);
    }

    #[test]
    fn single_identifier() {
        let t = parse_latex_subset("x").unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.label(t.root()), "x");
    }

    #[test]
    fn unsupported_command_is_named() {
        match parse_latex_subset(r"\mathbb{R}") {
            Err(IrError::Unsupported { token, offset }) => {
                assert_eq!(token, r"\mathbb");
                assert_eq!(offset, 0);
            }
            other => panic!("unexpected {other:?}"),
        }
        match parse_latex_subset("a+[b]") {
            Err(IrError::Unsupported { token, .. }) => assert_eq!(token, "["),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn precedence_table() {
        assert_eq!(sx("a+b*c"), "(+ a (* b c))");
        assert_eq!(sx("a-b-c"), "(- (- a b) c)");
        assert_eq!(sx("a*bc"), "(* a (* b c))");
        assert_eq!(sx("2ab"), "(* (* 2 a) b)");
        assert_eq!(sx("ab^2"), "(* a (^ b 2))");
        assert_eq!(sx("a/bc"), "(/ a (* b c))");
        assert_eq!(sx("x_1+y"), "(+ (_ x 1) y)");
        assert_eq!(sx("x^23"), "(* (^ x 2) 3)");
        assert_eq!(sx("x^{23}"), "(^ x 23)");
        assert_eq!(sx("-a^2"), "(- (^ a 2))");
        assert_eq!(sx("y=3.5x"), "(= y (* 3.5 x))");
    }

    #[test]
    fn functions_and_roots() {
        assert_eq!(sx(r"\sin x + 1"), "(+ (sin x) 1)");
        assert_eq!(sx(r"\sin^2 x"), "(^ (sin x) 2)");
        assert_eq!(sx(r"\log_2 x"), "(log 2 x)");
        assert_eq!(sx(r"\sqrt{a+b}"), "(sqrt (+ a b))");
        assert_eq!(sx(r"\sum_{i=1}^{n} x_i"), "(sum (= i 1) n (_ x i))");
        assert_eq!(sx(r"\int x"), "(int x)");
    }

    #[test]
    fn syntax_errors() {
        assert!(matches!(parse_latex_subset(""), Err(IrError::Parse { .. })));
        assert!(matches!(parse_latex_subset("(a+b"), Err(IrError::Parse { .. })));
        assert!(matches!(parse_latex_subset(r"\frac{a}"), Err(IrError::Parse { .. })));
        assert!(matches!(parse_latex_subset("a+"), Err(IrError::Parse { .. })));
        assert!(matches!(parse_latex_subset("a)"), Err(IrError::Parse { .. })));
    }
}
