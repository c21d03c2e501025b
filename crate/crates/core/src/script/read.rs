//! Reader for the test-file syntax: a small s-expression dialect.

#[derive(Debug, Clone, PartialEq)]
pub enum Datum {
    Int(i64),
    Float(f64),
    Str(String),
    Bool(bool),
    Symbol(String),
    /// `#:name`
    Keyword(String),
    /// Proper list, or a dotted one when `tail` is set.
    List(Vec<Node>, Option<Box<Node>>),
    Quote(Box<Node>),
}

/// A datum with the byte span and line it was read from.
#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub datum: Datum,
    pub start: usize,
    pub end: usize,
    pub line: usize,
}

impl Node {
    pub fn symbol(&self) -> Option<&str> {
        match &self.datum {
            Datum::Symbol(s) => Some(s),
            _ => None,
        }
    }

    pub fn items(&self) -> Option<&[Node]> {
        match &self.datum {
            Datum::List(items, None) => Some(items),
            _ => None,
        }
    }

    /// Verbatim source text of this node.
    pub fn text<'s>(&self, source: &'s str) -> &'s str {
        &source[self.start..self.end]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReadError {
    pub line: usize,
    pub message: String,
}

struct Reader<'s> {
    src: &'s str,
    pos: usize,
    line: usize,
}

type ReadResult<T> = Result<T, ReadError>;

fn is_delimiter(c: char) -> bool {
    c.is_whitespace() || matches!(c, '(' | ')' | '[' | ']' | '"' | ';' | '\'')
}

impl<'s> Reader<'s> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
        }
        Some(c)
    }

    fn error<T>(&self, message: impl Into<String>) -> ReadResult<T> {
        Err(ReadError { line: self.line, message: message.into() })
    }

    fn skip_atmosphere(&mut self) -> ReadResult<()> {
        loop {
            match self.peek() {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some(';') => {
                    while let Some(c) = self.bump() {
                        if c == '\n' {
                            break;
                        }
                    }
                }
                Some('#') if self.src[self.pos..].starts_with("#|") => {
                    let line = self.line;
                    self.pos += 2;
                    let mut depth = 1;
                    while depth > 0 {
                        let rest = &self.src[self.pos..];
                        if rest.is_empty() {
                            return Err(ReadError { line, message: "unterminated block comment".into() });
                        } else if rest.starts_with("|#") {
                            self.pos += 2;
                            depth -= 1;
                        } else if rest.starts_with("#|") {
                            self.pos += 2;
                            depth += 1;
                        } else {
                            self.bump();
                        }
                    }
                }
                Some('#') if self.src[self.pos..].starts_with("#;") => {
                    self.pos += 2;
                    self.read()?;
                }
                _ => return Ok(()),
            }
        }
    }

    fn read(&mut self) -> ReadResult<Node> {
        self.skip_atmosphere()?;
        let (start, line) = (self.pos, self.line);
        let node = |datum, end| Node { datum, start, end, line };
        match self.peek() {
            None => self.error("unexpected end of input"),
            Some('(') | Some('[') => {
                let close = if self.bump() == Some('(') { ')' } else { ']' };
                let mut items = Vec::new();
                let mut tail = None;
                loop {
                    self.skip_atmosphere()?;
                    match self.peek() {
                        None => return Err(ReadError { line, message: "unclosed list".into() }),
                        Some(c) if c == close => {
                            self.bump();
                            return Ok(node(Datum::List(items, tail), self.pos));
                        }
                        Some(')') | Some(']') => return self.error("mismatched closing bracket"),
                        Some('.') if tail.is_none() && self.dot_is_separator() => {
                            if items.is_empty() {
                                return self.error("dotted list without a head");
                            }
                            self.bump();
                            tail = Some(Box::new(self.read()?));
                            self.skip_atmosphere()?;
                            if self.peek() != Some(close) {
                                return self.error("expected one datum after the dot");
                            }
                        }
                        _ if tail.is_some() => return self.error("expected one datum after the dot"),
                        _ => items.push(self.read()?),
                    }
                }
            }
            Some(')') | Some(']') => self.error("unexpected closing bracket"),
            Some('\'') => {
                self.bump();
                let quoted = self.read()?;
                Ok(node(Datum::Quote(Box::new(quoted)), self.pos))
            }
            Some('"') => {
                self.bump();
                let mut s = String::new();
                loop {
                    match self.bump() {
                        None => return Err(ReadError { line, message: "unterminated string".into() }),
                        Some('"') => break,
                        Some('\\') => match self.bump() {
                            Some('n') => s.push('\n'),
                            Some('t') => s.push('\t'),
                            Some('\\') => s.push('\\'),
                            Some('"') => s.push('"'),
                            Some(c) => return self.error(format!("unknown string escape \\{c}")),
                            None => return self.error("unterminated string"),
                        },
                        Some(c) => s.push(c),
                    }
                }
                Ok(node(Datum::Str(s), self.pos))
            }
            Some(_) => {
                while self.peek().is_some_and(|c| !is_delimiter(c)) {
                    self.bump();
                }
                let token = &self.src[start..self.pos];
                let datum = self.atom(token)?;
                Ok(node(datum, self.pos))
            }
        }
    }

    fn dot_is_separator(&self) -> bool {
        self.src[self.pos + 1..].chars().next().is_none_or(is_delimiter)
    }

    fn atom(&self, token: &str) -> ReadResult<Datum> {
        Ok(match token {
            "#t" | "#true" => Datum::Bool(true),
            "#f" | "#false" => Datum::Bool(false),
            _ if token.starts_with("#:") && token.len() > 2 => Datum::Keyword(token[2..].to_owned()),
            _ if token.starts_with('#') => return self.error(format!("unsupported syntax {token}")),
            _ => {
                if let Ok(i) = token.parse::<i64>() {
                    Datum::Int(i)
                } else if looks_numeric(token) {
                    match token.parse::<f64>() {
                        Ok(x) => Datum::Float(x),
                        Err(_) => Datum::Symbol(token.to_owned()),
                    }
                } else {
                    Datum::Symbol(token.to_owned())
                }
            }
        })
    }
}

fn looks_numeric(token: &str) -> bool {
    let body = token.strip_prefix(['+', '-']).unwrap_or(token);
    body.starts_with(|c: char| c.is_ascii_digit() || c == '.') && body.chars().any(|c| c.is_ascii_digit())
}

/// Read every top-level datum in `source`.
pub fn read_all(source: &str) -> Result<Vec<Node>, ReadError> {
    let mut reader = Reader { src: source, pos: 0, line: 1 };
    let mut nodes = Vec::new();
    loop {
        reader.skip_atmosphere()?;
        if reader.peek().is_none() {
            return Ok(nodes);
        }
        nodes.push(reader.read()?);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(src: &str) -> Node {
        let mut nodes = read_all(src).unwrap();
        assert_eq!(nodes.len(), 1, "{src}");
        nodes.remove(0)
    }

    #[test]
    fn atoms() {
        assert_eq!(one("42").datum, Datum::Int(42));
        assert_eq!(one("-3").datum, Datum::Int(-3));
        assert_eq!(one("2.5").datum, Datum::Float(2.5));
        assert_eq!(one("#t").datum, Datum::Bool(true));
        assert_eq!(one("#f").datum, Datum::Bool(false));
        assert_eq!(one("+").datum, Datum::Symbol("+".into()));
        assert_eq!(one("-").datum, Datum::Symbol("-".into()));
        assert_eq!(one("...").datum, Datum::Symbol("...".into()));
        assert_eq!(one("#:metadata").datum, Datum::Keyword("metadata".into()));
        assert_eq!(one(r#""a\"b\n""#).datum, Datum::Str("a\"b\n".into()));
    }

    #[test]
    fn spans_capture_verbatim_text() {
        let src = "(is (= 5 (+ 2 2)))";
        let node = one(src);
        let inner = &node.items().unwrap()[1];
        assert_eq!(inner.text(src), "(= 5 (+ 2 2))");
        let quoted = one("'hello");
        assert_eq!(quoted.text("'hello"), "'hello");
    }

    #[test]
    fn dotted_pairs_and_comments() {
        let src = "; leading\n'((skip? . #t) #| block |# (x . 1)) #;(ignored)";
        let node = one(src);
        let Datum::Quote(inner) = node.datum else { panic!() };
        let items = inner.items().unwrap();
        assert!(matches!(&items[0].datum, Datum::List(h, Some(t)) if h.len() == 1 && t.datum == Datum::Bool(true)));
        assert_eq!(node.line, 2);
    }

    #[test]
    fn lines_are_tracked() {
        let nodes = read_all("(a)\n\n(b\n c)").unwrap();
        assert_eq!(nodes[0].line, 1);
        assert_eq!(nodes[1].line, 3);
        assert_eq!(nodes[1].items().unwrap()[1].line, 4);
    }

    #[test]
    fn malformed_input_reports_lines() {
        assert_eq!(read_all("(a\n(b)").unwrap_err().line, 1);
        assert_eq!(read_all("\n)").unwrap_err().line, 2);
        assert!(read_all("\"open").is_err());
        assert!(read_all("(. a)").is_err());
        assert!(read_all("(a . b c)").is_err());
        assert!(read_all("(a]").is_err());
    }
}
