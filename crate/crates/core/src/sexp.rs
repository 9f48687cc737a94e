//! Minimal S-expression reader shared by the text formats and the solver
//! output parser. `#b`/`#x` literals stay atoms so their width survives.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Sexp {
    Atom(String),
    /// A `"..."` string.
    Str(String),
    List(Vec<Sexp>),
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct SexpError {
    pub line: usize,
    pub message: &'static str,
}

impl Sexp {
    pub fn atom(&self) -> Option<&str> {
        match self {
            Sexp::Atom(a) => Some(a),
            _ => None,
        }
    }

    pub fn list(&self) -> Option<&[Sexp]> {
        match self {
            Sexp::List(l) => Some(l),
            _ => None,
        }
    }

    /// `(head rest...)` with an atom head.
    pub fn head(&self) -> Option<(&str, &[Sexp])> {
        let l = self.list()?;
        Some((l.first()?.atom()?, &l[1..]))
    }
}

impl fmt::Display for Sexp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sexp::Atom(a) => f.write_str(a),
            Sexp::Str(s) => crate::bir::expr::write_quoted(f, s),
            Sexp::List(items) => {
                f.write_str("(")?;
                for (i, x) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{x}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// Parses a sequence of S-expressions. `;` starts a line comment and
/// `|...|` is a quoted atom.
pub fn parse_all(text: &str) -> Result<Vec<Sexp>, SexpError> {
    let mut stack: Vec<Vec<Sexp>> = alloc::vec![Vec::new()];
    let mut line = 1;
    let mut chars = text.chars().peekable();
    let err = |line, message| SexpError { line, message };
    while let Some(c) = chars.next() {
        match c {
            '\n' => line += 1,
            c if c.is_whitespace() => {}
            ';' => {
                while chars.peek().is_some_and(|&c| c != '\n') {
                    chars.next();
                }
            }
            '(' => stack.push(Vec::new()),
            ')' => {
                if stack.len() == 1 {
                    return Err(err(line, "unbalanced ')'"));
                }
                let done = stack.pop().unwrap();
                stack.last_mut().unwrap().push(Sexp::List(done));
            }
            '"' => {
                let mut s = String::new();
                loop {
                    match chars.next() {
                        None => return Err(err(line, "unterminated string")),
                        Some('"') => break,
                        Some('\\') => match chars.next() {
                            Some(c @ ('"' | '\\')) => s.push(c),
                            _ => return Err(err(line, "bad escape in string")),
                        },
                        Some(c) => {
                            if c == '\n' {
                                line += 1;
                            }
                            s.push(c)
                        }
                    }
                }
                stack.last_mut().unwrap().push(Sexp::Str(s));
            }
            '|' => {
                let mut s = String::new();
                loop {
                    match chars.next() {
                        None => return Err(err(line, "unterminated |symbol|")),
                        Some('|') => break,
                        Some(c) => s.push(c),
                    }
                }
                stack.last_mut().unwrap().push(Sexp::Atom(s));
            }
            c => {
                let mut s = String::from(c);
                while let Some(&n) = chars.peek() {
                    if n.is_whitespace() || matches!(n, '(' | ')' | '"' | ';' | '|') {
                        break;
                    }
                    s.push(n);
                    chars.next();
                }
                stack.last_mut().unwrap().push(Sexp::Atom(s));
            }
        }
    }
    if stack.len() != 1 {
        return Err(err(line, "unbalanced '('"));
    }
    Ok(stack.pop().unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn reads_nested_lists_and_quotes() {
        let v = parse_all("(a (b \"c d\") |x y|) ; note\n#b01").unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(v[0].to_string(), "(a (b \"c d\") x y)");
        assert_eq!(v[1], Sexp::Atom("#b01".into()));
        assert_eq!(v[0].head().unwrap().0, "a");
    }

    #[test]
    fn reports_imbalance_with_line() {
        assert_eq!(parse_all("(a\n(b)").unwrap_err().line, 2);
        assert!(parse_all(")").is_err());
        assert!(parse_all("\"abc").is_err());
    }
}
