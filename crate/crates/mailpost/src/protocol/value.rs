//! Tokenizer for IMAP parenthesized data: atoms, quoted strings, inlined
//! literals, NIL, and nested lists. FETCH payloads, ENVELOPE, and
//! BODYSTRUCTURE are all read through this.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    Nil,
    /// Bare atom (includes numbers and section specs like `BODY[1]`).
    Atom(String),
    /// Quoted string or literal payload.
    Str(Vec<u8>),
    List(Vec<Value>),
}

impl Value {
    pub fn as_text(&self) -> Option<String> {
        match self {
            Value::Atom(a) => Some(a.clone()),
            Value::Str(b) => Some(String::from_utf8_lossy(b).into_owned()),
            _ => None,
        }
    }

    pub fn as_opt_text(&self) -> Option<String> {
        match self {
            Value::Nil => None,
            v => v.as_text(),
        }
    }

    pub fn as_number(&self) -> Option<u32> {
        match self {
            Value::Atom(a) => a.parse().ok(),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Value]> {
        match self {
            Value::List(items) => Some(items),
            _ => None,
        }
    }
}

pub struct Reader<'a> {
    input: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(input: &'a [u8]) -> Self {
        Reader { input, pos: 0 }
    }

    pub fn at_end(&mut self) -> bool {
        self.skip_spaces();
        self.pos >= self.input.len()
    }

    pub fn skip_spaces(&mut self) {
        while self.pos < self.input.len()
            && matches!(self.input[self.pos], b' ' | b'\r' | b'\n')
        {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.input.get(self.pos).copied()
    }

    /// Consumes `expected` (after skipping spaces) or errors.
    pub fn expect(&mut self, expected: u8) -> Result<()> {
        self.skip_spaces();
        if self.peek() == Some(expected) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(&format!("expected `{}`", expected as char)))
        }
    }

    /// True when the next non-space byte is `b` (not consumed).
    pub fn peek_is(&mut self, b: u8) -> bool {
        self.skip_spaces();
        self.peek() == Some(b)
    }

    fn err(&self, msg: &str) -> Error {
        Error::MalformedResponse(format!("{msg} at byte {}", self.pos))
    }

    /// Reads one value: NIL, atom, quoted, literal, or parenthesized list.
    pub fn read_value(&mut self) -> Result<Value> {
        self.skip_spaces();
        match self.peek() {
            None => Err(self.err("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let mut items = Vec::new();
                loop {
                    self.skip_spaces();
                    match self.peek() {
                        Some(b')') => {
                            self.pos += 1;
                            return Ok(Value::List(items));
                        }
                        None => return Err(self.err("unterminated list")),
                        _ => items.push(self.read_value()?),
                    }
                }
            }
            Some(b'"') => Ok(Value::Str(self.read_quoted()?)),
            Some(b'{') => Ok(Value::Str(self.read_literal()?)),
            Some(_) => {
                let atom = self.read_atom()?;
                if atom.eq_ignore_ascii_case("NIL") {
                    Ok(Value::Nil)
                } else {
                    Ok(Value::Atom(atom))
                }
            }
        }
    }

    fn read_quoted(&mut self) -> Result<Vec<u8>> {
        debug_assert_eq!(self.peek(), Some(b'"'));
        self.pos += 1;
        let mut out = Vec::new();
        loop {
            match self.peek() {
                None => return Err(self.err("unterminated quoted string")),
                Some(b'"') => {
                    self.pos += 1;
                    return Ok(out);
                }
                Some(b'\\') => {
                    self.pos += 1;
                    match self.peek() {
                        Some(c @ (b'"' | b'\\')) => {
                            out.push(c);
                            self.pos += 1;
                        }
                        _ => return Err(self.err("bad escape in quoted string")),
                    }
                }
                Some(c) => {
                    out.push(c);
                    self.pos += 1;
                }
            }
        }
    }

    /// `{N}` optionally followed by CRLF, then exactly N raw bytes (the
    /// literal is assumed already inlined into the buffer).
    fn read_literal(&mut self) -> Result<Vec<u8>> {
        debug_assert_eq!(self.peek(), Some(b'{'));
        self.pos += 1;
        let start = self.pos;
        while self.peek().map_or(false, |c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.peek() != Some(b'}') {
            return Err(self.err("bad literal length"));
        }
        let n: usize = std::str::from_utf8(&self.input[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| self.err("literal length overflow"))?;
        self.pos += 1;
        if self.input.get(self.pos) == Some(&b'\r') {
            self.pos += 1;
        }
        if self.input.get(self.pos) == Some(&b'\n') {
            self.pos += 1;
        }
        if self.pos + n > self.input.len() {
            return Err(self.err("literal exceeds input"));
        }
        let bytes = self.input[self.pos..self.pos + n].to_vec();
        self.pos += n;
        Ok(bytes)
    }

    /// Reads an atom. Bracketed sections (`BODY[HEADER.FIELDS (FROM)]`)
    /// are kept as one token, spaces inside the brackets included.
    pub fn read_atom(&mut self) -> Result<String> {
        let start = self.pos;
        while let Some(c) = self.peek() {
            match c {
                b' ' | b'\r' | b'\n' | b'(' | b')' | b'"' | b'{' => break,
                b'[' => {
                    while self.peek().is_some() && self.peek() != Some(b']') {
                        self.pos += 1;
                    }
                    if self.peek() != Some(b']') {
                        return Err(self.err("unterminated bracket section"));
                    }
                    self.pos += 1;
                }
                _ => self.pos += 1,
            }
        }
        if self.pos == start {
            return Err(self.err("expected atom"));
        }
        Ok(String::from_utf8_lossy(&self.input[start..self.pos]).into_owned())
    }
}
