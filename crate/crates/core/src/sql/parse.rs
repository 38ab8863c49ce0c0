use std::fmt;

use serde::{Deserialize, Serialize};

use super::{SqlError, TABLE_NAME};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AggFn {
    Count,
    Sum,
    Avg,
    Min,
    Max,
}

impl AggFn {
    fn from_keyword(k: &str) -> Option<Self> {
        Some(match k {
            "COUNT" => AggFn::Count,
            "SUM" => AggFn::Sum,
            "AVG" => AggFn::Avg,
            "MIN" => AggFn::Min,
            "MAX" => AggFn::Max,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AggFn::Count => "COUNT",
            AggFn::Sum => "SUM",
            AggFn::Avg => "AVG",
            AggFn::Min => "MIN",
            AggFn::Max => "MAX",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Literal {
    Int(i64),
    Real(f64),
    Text(String),
    Bool(bool),
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Int(i) => write!(f, "{i}"),
            Literal::Real(r) => write!(f, "{r:?}"),
            Literal::Text(s) => write!(f, "'{}'", s.replace('\'', "''")),
            Literal::Bool(b) => f.write_str(if *b { "TRUE" } else { "FALSE" }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn as_str(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

/// WHERE predicate tree; every comparison has a column on the left and literals on the right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Cmp { column: String, op: CmpOp, value: Literal },
    Between { column: String, low: Literal, high: Literal, negated: bool },
    In { column: String, list: Vec<Literal>, negated: bool },
    Like { column: String, pattern: String, negated: bool },
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
}

impl Expr {
    fn precedence(&self) -> u8 {
        match self {
            Expr::Or(..) => 1,
            Expr::And(..) => 2,
            Expr::Not(..) => 3,
            _ => 4,
        }
    }

    fn fmt_child(&self, child: &Expr, min: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if child.precedence() < min {
            write!(f, "({child})")
        } else {
            write!(f, "{child}")
        }
    }

    /// Every column name referenced by the predicate.
    pub fn columns(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_columns(&mut out);
        out
    }

    fn collect_columns<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Expr::Cmp { column, .. } | Expr::Between { column, .. } | Expr::In { column, .. } | Expr::Like { column, .. } => {
                out.push(column)
            }
            Expr::And(a, b) | Expr::Or(a, b) => {
                a.collect_columns(out);
                b.collect_columns(out);
            }
            Expr::Not(e) => e.collect_columns(out),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let not = |n: bool| if n { "NOT " } else { "" };
        match self {
            Expr::Cmp { column, op, value } => write!(f, "{} {} {value}", Ident(column), op.as_str()),
            Expr::Between { column, low, high, negated } => {
                write!(f, "{} {}BETWEEN {low} AND {high}", Ident(column), not(*negated))
            }
            Expr::In { column, list, negated } => {
                let items: Vec<String> = list.iter().map(|l| l.to_string()).collect();
                write!(f, "{} {}IN ({})", Ident(column), not(*negated), items.join(", "))
            }
            Expr::Like { column, pattern, negated } => {
                write!(f, "{} {}LIKE {}", Ident(column), not(*negated), Literal::Text(pattern.clone()))
            }
            Expr::And(a, b) => {
                self.fmt_child(a, 2, f)?;
                f.write_str(" AND ")?;
                self.fmt_child(b, 3, f)
            }
            Expr::Or(a, b) => {
                self.fmt_child(a, 1, f)?;
                f.write_str(" OR ")?;
                self.fmt_child(b, 2, f)
            }
            Expr::Not(e) => {
                f.write_str("NOT ")?;
                self.fmt_child(e, 3, f)
            }
        }
    }
}

/// A projection; `Star` is `*`, and an aggregate with `arg: None` is `COUNT(*)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SelectItem {
    Star,
    Column { name: String, alias: Option<String> },
    Aggregate { func: AggFn, arg: Option<String>, alias: Option<String> },
}

impl SelectItem {
    pub fn is_aggregate(&self) -> bool {
        matches!(self, SelectItem::Aggregate { .. })
    }

    pub fn alias(&self) -> Option<&str> {
        match self {
            SelectItem::Star => None,
            SelectItem::Column { alias, .. } | SelectItem::Aggregate { alias, .. } => alias.as_deref(),
        }
    }
}

fn fmt_agg(func: AggFn, arg: &Option<String>) -> String {
    match arg {
        Some(a) => format!("{}({})", func.as_str(), Ident(a)),
        None => format!("{}(*)", func.as_str()),
    }
}

impl fmt::Display for SelectItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SelectItem::Star => f.write_str("*"),
            SelectItem::Column { name, alias } => {
                write!(f, "{}", Ident(name))?;
                alias.iter().try_for_each(|a| write!(f, " AS {}", Ident(a)))
            }
            SelectItem::Aggregate { func, arg, alias } => {
                f.write_str(&fmt_agg(*func, arg))?;
                alias.iter().try_for_each(|a| write!(f, " AS {}", Ident(a)))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum OrderTarget {
    /// A column, or after validation possibly a projection alias.
    Column(String),
    Aggregate { func: AggFn, arg: Option<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderKey {
    pub target: OrderTarget,
    pub descending: bool,
}

impl fmt::Display for OrderKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.target {
            OrderTarget::Column(c) => write!(f, "{}", Ident(c))?,
            OrderTarget::Aggregate { func, arg } => f.write_str(&fmt_agg(*func, arg))?,
        }
        if self.descending {
            f.write_str(" DESC")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SqlAst {
    pub projections: Vec<SelectItem>,
    pub where_clause: Option<Expr>,
    pub group_by: Vec<String>,
    pub order_by: Vec<OrderKey>,
    pub limit: Option<u64>,
}

impl fmt::Display for SqlAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let items: Vec<String> = self.projections.iter().map(|p| p.to_string()).collect();
        write!(f, "SELECT {} FROM {TABLE_NAME}", items.join(", "))?;
        if let Some(w) = &self.where_clause {
            write!(f, " WHERE {w}")?;
        }
        if !self.group_by.is_empty() {
            let cols: Vec<String> = self.group_by.iter().map(|c| Ident(c).to_string()).collect();
            write!(f, " GROUP BY {}", cols.join(", "))?;
        }
        if !self.order_by.is_empty() {
            let keys: Vec<String> = self.order_by.iter().map(|k| k.to_string()).collect();
            write!(f, " ORDER BY {}", keys.join(", "))?;
        }
        if let Some(n) = self.limit {
            write!(f, " LIMIT {n}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Quoted(String),
    Number(String),
    Str(String),
    Sym(&'static str),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    pos: usize,
}

fn parse_err(position: usize, message: impl Into<String>) -> SqlError {
    SqlError::Parse { position, message: message.into() }
}

fn unsupported(what: &str) -> SqlError {
    SqlError::UnsupportedFeature(what.to_string())
}

fn lex(src: &str) -> Result<Vec<Token>, SqlError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if src[i..].starts_with("--") || src[i..].starts_with("/*") || c == b'#' {
            return Err(unsupported("comments"));
        }
        let tok = if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            Tok::Word(src[start..i].to_string())
        } else if c.is_ascii_digit() || (c == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            if i < bytes.len() && (bytes[i].is_ascii_alphabetic() || bytes[i] == b'_') {
                return Err(parse_err(i, "malformed number"));
            }
            Tok::Number(src[start..i].to_string())
        } else if c == b'\'' || c == b'"' {
            let mut s = String::new();
            i += 1;
            loop {
                let Some(ch) = src[i..].chars().next() else {
                    return Err(parse_err(start, "unterminated quoted string"));
                };
                i += ch.len_utf8();
                if ch as u32 == c as u32 {
                    if bytes.get(i) == Some(&c) {
                        s.push(ch);
                        i += 1;
                        continue;
                    }
                    break;
                }
                s.push(ch);
            }
            if c == b'\'' {
                Tok::Str(s)
            } else {
                Tok::Quoted(s)
            }
        } else {
            const SYMS: [&str; 16] = ["<=", ">=", "!=", "<>", "||", "=", "<", ">", ",", "(", ")", "*", ";", ".", "-", "+"];
            let Some(sym) = SYMS.iter().find(|s| src[i..].starts_with(**s)) else {
                let ch = src[i..].chars().next().unwrap_or('?');
                return Err(parse_err(i, format!("unexpected character {ch:?}")));
            };
            i += sym.len();
            Tok::Sym(sym)
        };
        out.push(Token { tok, pos: start });
    }
    Ok(out)
}

const DML: [&str; 6] = ["INSERT", "UPDATE", "DELETE", "MERGE", "REPLACE", "UPSERT"];
const DDL: [&str; 5] = ["CREATE", "DROP", "ALTER", "TRUNCATE", "RENAME"];

fn statement_kind(word: &str) -> Option<&'static str> {
    let w = word.to_ascii_uppercase();
    if DML.contains(&w.as_str()) {
        Some("DML")
    } else if DDL.contains(&w.as_str()) {
        Some("DDL")
    } else {
        match w.as_str() {
            "PRAGMA" => Some("PRAGMA"),
            "WITH" => Some("CTE"),
            "ATTACH" | "DETACH" => Some("ATTACH/DETACH"),
            "BEGIN" | "COMMIT" | "ROLLBACK" | "SAVEPOINT" | "RELEASE" => Some("transaction control"),
            "GRANT" | "REVOKE" => Some("access control"),
            "EXEC" | "EXECUTE" | "CALL" => Some("procedure call"),
            "VACUUM" | "ANALYZE" | "REINDEX" => Some("maintenance statement"),
            "LOAD" | "COPY" => Some("data loading"),
            "EXPLAIN" => Some("EXPLAIN"),
            "VALUES" => Some("VALUES"),
            "SET" => Some("SET"),
            _ => None,
        }
    }
}

/// Parses the read-only subset
/// `SELECT items FROM t [WHERE p] [GROUP BY cols] [ORDER BY keys] [LIMIT n]`.
/// Constructs outside it are reported as unsupported features by name.
pub fn parse_sql(text: &str) -> Result<SqlAst, SqlError> {
    let mut toks = lex(text)?;
    if let Some(semi) = toks.iter().position(|t| t.tok == Tok::Sym(";")) {
        if semi + 1 < toks.len() {
            return Err(unsupported("multiple statements"));
        }
        toks.pop();
    }
    let first = toks.first().ok_or_else(|| parse_err(0, "empty statement"))?;
    if let Tok::Word(w) = &first.tok {
        if let Some(kind) = statement_kind(w) {
            return Err(unsupported(kind));
        }
    }
    let has_word = |ws: &[&str]| toks.iter().any(|t| matches!(&t.tok, Tok::Word(w) if ws.iter().any(|k| w.eq_ignore_ascii_case(k))));
    if has_word(&["UNION", "INTERSECT", "EXCEPT"]) {
        return Err(unsupported("set operation"));
    }
    // Nested SELECT anywhere is a subquery, whatever surrounds it.
    if toks.iter().skip(1).any(|t| matches!(&t.tok, Tok::Word(w) if w.eq_ignore_ascii_case("SELECT"))) {
        return Err(unsupported("subquery"));
    }
    let mut p = Parser { toks, i: 0, end: text.len() };
    let ast = p.select()?;
    if let Some(t) = p.peek() {
        let pos = t.pos;
        if let Some(k) = p.peek_kw() {
            if let Some(what) = trailing_feature(&k) {
                return Err(unsupported(what));
            }
        }
        return Err(parse_err(pos, "unexpected trailing input"));
    }
    Ok(ast)
}

fn trailing_feature(kw: &str) -> Option<&'static str> {
    Some(match kw {
        "UNION" | "INTERSECT" | "EXCEPT" | "MINUS" => "set operation",
        "JOIN" | "INNER" | "LEFT" | "RIGHT" | "FULL" | "CROSS" | "NATURAL" | "OUTER" => "JOIN",
        "HAVING" => "HAVING",
        "OFFSET" => "OFFSET",
        "WINDOW" | "OVER" => "window function",
        "INTO" => "SELECT INTO",
        "RETURNING" => "RETURNING",
        "FOR" => "locking clause",
        _ => return None,
    })
}

struct Parser {
    toks: Vec<Token>,
    i: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.i)
    }

    fn pos(&self) -> usize {
        self.peek().map_or(self.end, |t| t.pos)
    }

    fn peek_kw(&self) -> Option<String> {
        match &self.peek()?.tok {
            Tok::Word(w) => Some(w.to_ascii_uppercase()),
            _ => None,
        }
    }

    fn at_kw(&self, kw: &str) -> bool {
        self.peek_kw().as_deref() == Some(kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        let hit = self.at_kw(kw);
        if hit {
            self.i += 1;
        }
        hit
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), SqlError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(parse_err(self.pos(), format!("expected {kw}")))
        }
    }

    fn at_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Token { tok: Tok::Sym(x), .. }) if *x == s)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        let hit = self.at_sym(s);
        if hit {
            self.i += 1;
        }
        hit
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), SqlError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            Err(parse_err(self.pos(), format!("expected '{s}'")))
        }
    }

    fn select(&mut self) -> Result<SqlAst, SqlError> {
        self.expect_kw("SELECT")?;
        if self.at_kw("DISTINCT") {
            return Err(unsupported("DISTINCT"));
        }
        self.eat_kw("ALL");
        let mut projections = vec![self.select_item()?];
        while self.eat_sym(",") {
            projections.push(self.select_item()?);
        }
        if self.at_kw("INTO") {
            return Err(unsupported("SELECT INTO"));
        }
        self.expect_kw("FROM")?;
        self.table()?;
        let where_clause = if self.eat_kw("WHERE") { Some(self.or_expr()?) } else { None };
        let mut group_by = Vec::new();
        if self.eat_kw("GROUP") {
            self.expect_kw("BY")?;
            group_by.push(self.ident("column")?);
            while self.eat_sym(",") {
                group_by.push(self.ident("column")?);
            }
        }
        if self.at_kw("HAVING") {
            return Err(unsupported("HAVING"));
        }
        let mut order_by = Vec::new();
        if self.eat_kw("ORDER") {
            self.expect_kw("BY")?;
            loop {
                order_by.push(self.order_key()?);
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        let limit = if self.eat_kw("LIMIT") {
            let pos = self.pos();
            match self.literal()? {
                Literal::Int(n) if n >= 0 => Some(n as u64),
                _ => return Err(parse_err(pos, "LIMIT expects a non-negative integer")),
            }
        } else {
            None
        };
        Ok(SqlAst { projections, where_clause, group_by, order_by, limit })
    }

    fn table(&mut self) -> Result<(), SqlError> {
        if self.at_sym("(") {
            return Err(unsupported("subquery"));
        }
        let name = self.ident("table name")?;
        if self.at_sym(".") {
            return Err(unsupported("qualified table name"));
        }
        if !name.eq_ignore_ascii_case(TABLE_NAME) {
            return Err(SqlError::UnsupportedFeature(format!("table {name:?} (only \"{TABLE_NAME}\" is queryable)")));
        }
        if self.at_sym(",") {
            return Err(unsupported("JOIN"));
        }
        if let Some(k) = self.peek_kw() {
            if matches!(trailing_feature(&k), Some("JOIN")) {
                return Err(unsupported("JOIN"));
            }
            // Table alias: `FROM t AS x` / `FROM t x`.
            if k == "AS" {
                return Err(unsupported("table alias"));
            }
        }
        Ok(())
    }

    fn ident(&mut self, what: &str) -> Result<String, SqlError> {
        let pos = self.pos();
        match self.peek().map(|t| t.tok.clone()) {
            Some(Tok::Word(w)) if !is_reserved(&w) => {
                self.i += 1;
                if self.at_sym("(") {
                    return Err(SqlError::UnsupportedFeature(format!("function call {w}()")));
                }
                if self.at_sym(".") {
                    return Err(unsupported("qualified column name"));
                }
                Ok(w)
            }
            Some(Tok::Quoted(w)) => {
                self.i += 1;
                Ok(w)
            }
            _ => Err(parse_err(pos, format!("expected {what}"))),
        }
    }

    fn alias(&mut self) -> Result<Option<String>, SqlError> {
        if self.eat_kw("AS") {
            return self.ident("alias").map(Some);
        }
        Ok(None)
    }

    fn aggregate_call(&mut self) -> Result<Option<(AggFn, Option<String>)>, SqlError> {
        let Some(func) = self.peek_kw().and_then(|k| AggFn::from_keyword(&k)) else {
            return Ok(None);
        };
        if !matches!(self.toks.get(self.i + 1), Some(Token { tok: Tok::Sym("("), .. })) {
            return Ok(None);
        }
        self.i += 2;
        if self.at_kw("DISTINCT") {
            return Err(unsupported("DISTINCT"));
        }
        let arg = if self.eat_sym("*") {
            if func != AggFn::Count {
                return Err(parse_err(self.pos(), format!("{}(*) is not allowed", func.as_str())));
            }
            None
        } else {
            Some(self.ident("column")?)
        };
        self.expect_sym(")")?;
        Ok(Some((func, arg)))
    }

    fn select_item(&mut self) -> Result<SelectItem, SqlError> {
        if self.eat_sym("*") {
            return Ok(SelectItem::Star);
        }
        if let Some((func, arg)) = self.aggregate_call()? {
            let alias = self.alias()?;
            return Ok(SelectItem::Aggregate { func, arg, alias });
        }
        if matches!(self.peek().map(|t| &t.tok), Some(Tok::Number(_) | Tok::Str(_))) {
            return Err(unsupported("literal projection"));
        }
        let name = self.ident("column")?;
        if self.at_sym("+") || self.at_sym("-") || self.at_sym("*") || self.at_sym("||") {
            return Err(unsupported("arithmetic expression"));
        }
        let alias = self.alias()?;
        Ok(SelectItem::Column { name, alias })
    }

    fn order_key(&mut self) -> Result<OrderKey, SqlError> {
        let target = match self.aggregate_call()? {
            Some((func, arg)) => OrderTarget::Aggregate { func, arg },
            None => {
                if matches!(self.peek().map(|t| &t.tok), Some(Tok::Number(_))) {
                    return Err(unsupported("ordinal ORDER BY"));
                }
                OrderTarget::Column(self.ident("column")?)
            }
        };
        let descending = if self.eat_kw("DESC") {
            true
        } else {
            self.eat_kw("ASC");
            false
        };
        if self.at_kw("NULLS") {
            return Err(unsupported("NULLS FIRST/LAST"));
        }
        Ok(OrderKey { target, descending })
    }

    fn or_expr(&mut self) -> Result<Expr, SqlError> {
        let mut e = self.and_expr()?;
        while self.eat_kw("OR") {
            e = Expr::Or(Box::new(e), Box::new(self.and_expr()?));
        }
        Ok(e)
    }

    fn and_expr(&mut self) -> Result<Expr, SqlError> {
        let mut e = self.not_expr()?;
        while self.eat_kw("AND") {
            e = Expr::And(Box::new(e), Box::new(self.not_expr()?));
        }
        Ok(e)
    }

    fn not_expr(&mut self) -> Result<Expr, SqlError> {
        if self.eat_kw("NOT") {
            return Ok(Expr::Not(Box::new(self.not_expr()?)));
        }
        if self.eat_sym("(") {
            let e = self.or_expr()?;
            self.expect_sym(")")?;
            return Ok(e);
        }
        self.predicate()
    }

    fn predicate(&mut self) -> Result<Expr, SqlError> {
        if self.at_kw("EXISTS") {
            return Err(unsupported("subquery"));
        }
        if matches!(self.peek().map(|t| &t.tok), Some(Tok::Number(_) | Tok::Str(_))) {
            return Err(parse_err(self.pos(), "comparison must start with a column"));
        }
        let column = self.ident("column")?;
        if self.at_sym("+") || self.at_sym("-") || self.at_sym("*") || self.at_sym("||") {
            return Err(unsupported("arithmetic expression"));
        }
        if self.at_kw("IS") {
            return Err(unsupported("IS NULL"));
        }
        let negated = self.eat_kw("NOT");
        if self.eat_kw("BETWEEN") {
            let low = self.literal()?;
            self.expect_kw("AND")?;
            let high = self.literal()?;
            return Ok(Expr::Between { column, low, high, negated });
        }
        if self.eat_kw("IN") {
            self.expect_sym("(")?;
            let mut list = vec![self.literal()?];
            while self.eat_sym(",") {
                list.push(self.literal()?);
            }
            self.expect_sym(")")?;
            return Ok(Expr::In { column, list, negated });
        }
        if self.eat_kw("LIKE") {
            let pos = self.pos();
            return match self.literal()? {
                Literal::Text(pattern) => Ok(Expr::Like { column, pattern, negated }),
                _ => Err(parse_err(pos, "LIKE expects a quoted pattern")),
            };
        }
        if negated {
            return Err(parse_err(self.pos(), "expected BETWEEN, IN or LIKE after NOT"));
        }
        let pos = self.pos();
        let op = match self.peek().map(|t| t.tok.clone()) {
            Some(Tok::Sym(s)) => match s {
                "=" => CmpOp::Eq,
                "!=" | "<>" => CmpOp::Ne,
                "<" => CmpOp::Lt,
                "<=" => CmpOp::Le,
                ">" => CmpOp::Gt,
                ">=" => CmpOp::Ge,
                _ => return Err(parse_err(pos, "expected comparison operator")),
            },
            _ => return Err(parse_err(pos, "expected comparison operator")),
        };
        self.i += 1;
        if matches!(self.peek().map(|t| &t.tok), Some(Tok::Word(w)) if !is_literal_word(w)) || matches!(self.peek().map(|t| &t.tok), Some(Tok::Quoted(_))) {
            return Err(unsupported("column-to-column comparison"));
        }
        let value = self.literal()?;
        if self.at_sym("+") || self.at_sym("-") || self.at_sym("*") || self.at_sym("||") {
            return Err(unsupported("arithmetic expression"));
        }
        Ok(Expr::Cmp { column, op, value })
    }

    fn literal(&mut self) -> Result<Literal, SqlError> {
        let pos = self.pos();
        if self.at_sym("(") {
            return Err(parse_err(pos, "expected literal"));
        }
        let neg = self.eat_sym("-");
        let tok = self.peek().map(|t| t.tok.clone());
        let lit = match tok {
            Some(Tok::Number(n)) => {
                let text = if neg { format!("-{n}") } else { n };
                if text.contains(['.', 'e', 'E']) {
                    Literal::Real(text.parse().map_err(|_| parse_err(pos, "malformed number"))?)
                } else {
                    text.parse::<i64>()
                        .map(Literal::Int)
                        .map_err(|_| parse_err(pos, "integer literal out of range"))?
                }
            }
            Some(Tok::Str(s)) if !neg => Literal::Text(s),
            Some(Tok::Word(w)) if !neg && w.eq_ignore_ascii_case("TRUE") => Literal::Bool(true),
            Some(Tok::Word(w)) if !neg && w.eq_ignore_ascii_case("FALSE") => Literal::Bool(false),
            Some(Tok::Word(w)) if w.eq_ignore_ascii_case("NULL") => return Err(unsupported("NULL literal")),
            _ => return Err(parse_err(pos, "expected literal")),
        };
        self.i += 1;
        Ok(lit)
    }
}

/// Identifier as printed in canonical SQL; reserved words are double-quoted.
pub(crate) struct Ident<'a>(pub &'a str);

impl fmt::Display for Ident<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if is_reserved(self.0) || is_literal_word(self.0) {
            write!(f, "\"{}\"", self.0.replace('"', "\"\""))
        } else {
            f.write_str(self.0)
        }
    }
}

fn is_literal_word(w: &str) -> bool {
    ["TRUE", "FALSE", "NULL"].iter().any(|k| w.eq_ignore_ascii_case(k))
}

fn is_reserved(w: &str) -> bool {
    const RESERVED: [&str; 30] = [
        "SELECT", "FROM", "WHERE", "GROUP", "BY", "ORDER", "LIMIT", "AND", "OR", "NOT", "BETWEEN", "IN", "LIKE", "AS",
        "ASC", "DESC", "JOIN", "UNION", "HAVING", "IS", "NULL", "TRUE", "FALSE", "ON", "DISTINCT", "EXISTS", "INTO",
        "OFFSET", "INTERSECT", "EXCEPT",
    ];
    RESERVED.iter().any(|k| w.eq_ignore_ascii_case(k))
}
