//! Tiny arithmetic evaluator for the k(n) and h(n) tuning rules.
//!
//! Rules are plain strings like `"ceil(n^0.667)"` or `"0.8*n^-0.2"`, kept in
//! configs and echoed into every result so the tuning of an experiment is
//! always visible. Grammar: `+ - * /`, right-associative `^`, unary minus,
//! parentheses, the variable `n`, and the functions `ceil`, `floor`, `round`,
//! `sqrt`, `exp`, `log` (natural), `log2`, `log10`.

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
enum Node {
    Num(f64),
    Var,
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

#[derive(Clone, Copy, Debug)]
enum Func {
    Ceil,
    Floor,
    Round,
    Sqrt,
    Exp,
    Log,
    Log2,
    Log10,
}

/// A parsed tuning rule in the single variable n.
#[derive(Clone, Debug)]
pub struct Rule {
    source: String,
    root: Node,
}

impl Rule {
    pub fn parse(source: &str) -> Result<Rule> {
        let tokens = tokenize(source)?;
        let mut parser = Parser {
            source,
            tokens,
            pos: 0,
        };
        let root = parser.expr()?;
        if parser.pos != parser.tokens.len() {
            return Err(parser.error("trailing input"));
        }
        Ok(Rule {
            source: source.to_string(),
            root,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, n: usize) -> Result<f64> {
        let v = eval_node(&self.root, n as f64);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::RuleValue {
                rule: self.source.clone(),
                n,
                value: v,
                message: "not finite".into(),
            })
        }
    }

    /// Evaluate as a neighbor count: the value must be integral (write an
    /// explicit `ceil`/`floor`/`round` otherwise) and inside `1..=n`.
    pub fn eval_k(&self, n: usize) -> Result<usize> {
        let v = self.eval(n)?;
        let rounded = v.round();
        if (v - rounded).abs() > 1e-9 {
            return Err(Error::RuleValue {
                rule: self.source.clone(),
                n,
                value: v,
                message: "k rule must produce an integer; wrap it in ceil(), floor() or round()"
                    .into(),
            });
        }
        let k = rounded as i64;
        if k < 1 || k as usize > n {
            return Err(Error::RuleValue {
                rule: self.source.clone(),
                n,
                value: v,
                message: format!("k must lie in 1..={n}"),
            });
        }
        Ok(k as usize)
    }

    /// Evaluate as a bandwidth: strictly positive.
    pub fn eval_h(&self, n: usize) -> Result<f64> {
        let v = self.eval(n)?;
        if v <= 0.0 {
            return Err(Error::RuleValue {
                rule: self.source.clone(),
                n,
                value: v,
                message: "bandwidth must be positive".into(),
            });
        }
        Ok(v)
    }
}

fn eval_node(node: &Node, n: f64) -> f64 {
    match node {
        Node::Num(v) => *v,
        Node::Var => n,
        Node::Neg(a) => -eval_node(a, n),
        Node::Add(a, b) => eval_node(a, n) + eval_node(b, n),
        Node::Sub(a, b) => eval_node(a, n) - eval_node(b, n),
        Node::Mul(a, b) => eval_node(a, n) * eval_node(b, n),
        Node::Div(a, b) => eval_node(a, n) / eval_node(b, n),
        Node::Pow(a, b) => eval_node(a, n).powf(eval_node(b, n)),
        Node::Call(f, a) => {
            let x = eval_node(a, n);
            match f {
                Func::Ceil => x.ceil(),
                Func::Floor => x.floor(),
                Func::Round => x.round(),
                Func::Sqrt => x.sqrt(),
                Func::Exp => x.exp(),
                Func::Log => x.ln(),
                Func::Log2 => x.log2(),
                Func::Log10 => x.log10(),
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn tokenize(source: &str) -> Result<Vec<Token>> {
    let mut tokens = Vec::new();
    let bytes: Vec<char> = source.chars().collect();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            ' ' | '\t' => i += 1,
            '+' => {
                tokens.push(Token::Plus);
                i += 1;
            }
            '-' => {
                tokens.push(Token::Minus);
                i += 1;
            }
            '*' => {
                tokens.push(Token::Star);
                i += 1;
            }
            '/' => {
                tokens.push(Token::Slash);
                i += 1;
            }
            '^' => {
                tokens.push(Token::Caret);
                i += 1;
            }
            '(' => {
                tokens.push(Token::LParen);
                i += 1;
            }
            ')' => {
                tokens.push(Token::RParen);
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() && matches!(bytes[i], '0'..='9' | '.' | 'e' | 'E') {
                    // accept exponent signs directly after e/E
                    if matches!(bytes[i], 'e' | 'E')
                        && i + 1 < bytes.len()
                        && matches!(bytes[i + 1], '+' | '-')
                    {
                        i += 1;
                    }
                    i += 1;
                }
                let text: String = bytes[start..i].iter().collect();
                let value = text.parse::<f64>().map_err(|_| Error::RuleParse {
                    rule: source.to_string(),
                    message: format!("bad number `{text}`"),
                })?;
                tokens.push(Token::Num(value));
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len() && matches!(bytes[i], 'a'..='z' | 'A'..='Z' | '0'..='9' | '_')
                {
                    i += 1;
                }
                tokens.push(Token::Ident(bytes[start..i].iter().collect()));
            }
            other => {
                return Err(Error::RuleParse {
                    rule: source.to_string(),
                    message: format!("unexpected character `{other}`"),
                })
            }
        }
    }
    Ok(tokens)
}

struct Parser<'a> {
    source: &'a str,
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> Error {
        Error::RuleParse {
            rule: self.source.to_string(),
            message: format!("{message} (token {})", self.pos),
        }
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expr(&mut self) -> Result<Node> {
        let mut node = self.term()?;
        while let Some(tok) = self.peek() {
            match tok {
                Token::Plus => {
                    self.bump();
                    node = Node::Add(Box::new(node), Box::new(self.term()?));
                }
                Token::Minus => {
                    self.bump();
                    node = Node::Sub(Box::new(node), Box::new(self.term()?));
                }
                _ => break,
            }
        }
        Ok(node)
    }

    fn term(&mut self) -> Result<Node> {
        let mut node = self.factor()?;
        while let Some(tok) = self.peek() {
            match tok {
                Token::Star => {
                    self.bump();
                    node = Node::Mul(Box::new(node), Box::new(self.factor()?));
                }
                Token::Slash => {
                    self.bump();
                    node = Node::Div(Box::new(node), Box::new(self.factor()?));
                }
                _ => break,
            }
        }
        Ok(node)
    }

    // right-associative power binds tighter than unary minus on its left,
    // so -n^2 parses as -(n^2) and n^-0.2 accepts the signed exponent
    fn factor(&mut self) -> Result<Node> {
        let base = self.unary()?;
        if matches!(self.peek(), Some(Token::Caret)) {
            self.bump();
            let exponent = self.factor()?;
            return Ok(Node::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn unary(&mut self) -> Result<Node> {
        if matches!(self.peek(), Some(Token::Minus)) {
            self.bump();
            return Ok(Node::Neg(Box::new(self.factor()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Node> {
        match self.bump() {
            Some(Token::Num(v)) => Ok(Node::Num(v)),
            Some(Token::LParen) => {
                let inner = self.expr()?;
                match self.bump() {
                    Some(Token::RParen) => Ok(inner),
                    _ => Err(self.error("expected `)`")),
                }
            }
            Some(Token::Ident(name)) => {
                if name == "n" {
                    return Ok(Node::Var);
                }
                let func = match name.as_str() {
                    "ceil" => Func::Ceil,
                    "floor" => Func::Floor,
                    "round" => Func::Round,
                    "sqrt" => Func::Sqrt,
                    "exp" => Func::Exp,
                    "log" | "ln" => Func::Log,
                    "log2" => Func::Log2,
                    "log10" => Func::Log10,
                    other => return Err(self.error(&format!("unknown identifier `{other}`"))),
                };
                match self.bump() {
                    Some(Token::LParen) => {}
                    _ => return Err(self.error(&format!("expected `(` after `{name}`"))),
                }
                let arg = self.expr()?;
                match self.bump() {
                    Some(Token::RParen) => Ok(Node::Call(func, Box::new(arg))),
                    _ => Err(self.error("expected `)`")),
                }
            }
            _ => Err(self.error("expected a number, `n`, a function, or `(`")),
        }
    }
}
