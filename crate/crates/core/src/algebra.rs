//! Tensor-algebra front end.
//!
//! A statement is a single perfectly nested accumulation such as
//!
//! ```text
//! gemm: C[m,n] += A[m,k] * B[n,k]; m=16 n=16 k=16
//! ```
//!
//! Every index expression is a sum of iterators, so each tensor access is an
//! integer matrix over the iterator vector. Iterator order is the order of the
//! bound declarations.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoopIterator {
    pub name: String,
    pub bound: usize,
}

/// One tensor reference: `index = access_matrix * x + offsets`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorAccess {
    pub tensor_name: String,
    pub access_matrix: Vec<Vec<i64>>,
    pub offsets: Vec<i64>,
}

impl TensorAccess {
    pub fn rank(&self) -> usize {
        self.access_matrix.len()
    }

    /// Tensor index touched by iteration `x`.
    pub fn index(&self, x: &[i64]) -> Vec<i64> {
        self.access_matrix
            .iter()
            .zip(&self.offsets)
            .map(|(row, off)| row.iter().zip(x).map(|(a, v)| a * v).sum::<i64>() + off)
            .collect()
    }

    /// Columns of the access matrix for the given iterators, one row per
    /// tensor dimension.
    pub fn columns(&self, iterators: &[usize]) -> Vec<Vec<i64>> {
        self.access_matrix
            .iter()
            .map(|row| iterators.iter().map(|&c| row[c]).collect())
            .collect()
    }

    /// Access matrix restricted to three selected loops.
    pub fn restrict(&self, selection: [usize; 3]) -> Vec<[i64; 3]> {
        self.access_matrix
            .iter()
            .map(|row| [row[selection[0]], row[selection[1]], row[selection[2]]])
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorAlgebra {
    pub name: String,
    pub iterators: Vec<LoopIterator>,
    pub output: TensorAccess,
    pub inputs: Vec<TensorAccess>,
    pub reduction_iterators: Vec<String>,
}

impl TensorAlgebra {
    pub fn parse(source: &str) -> Result<Self> {
        parse_tensor_algebra(source)
    }

    pub fn iterator_index(&self, name: &str) -> Option<usize> {
        self.iterators.iter().position(|it| it.name == name)
    }

    pub fn bounds(&self) -> Vec<usize> {
        self.iterators.iter().map(|it| it.bound).collect()
    }

    /// Inputs in statement order, then the output.
    pub fn tensors(&self) -> impl Iterator<Item = &TensorAccess> {
        self.inputs.iter().chain(std::iter::once(&self.output))
    }

    pub fn tensor(&self, name: &str) -> Option<&TensorAccess> {
        self.tensors().find(|t| t.tensor_name == name)
    }

    pub fn is_reduction(&self, iterator: usize) -> bool {
        self.reduction_iterators
            .iter()
            .any(|r| *r == self.iterators[iterator].name)
    }

    /// Number of loop instances.
    pub fn volume(&self) -> u64 {
        self.iterators.iter().map(|it| it.bound as u64).product()
    }

    /// Extent of each tensor dimension, inferred as the largest index over the
    /// iteration space plus one.
    pub fn extents(&self, access: &TensorAccess) -> Vec<usize> {
        access
            .access_matrix
            .iter()
            .zip(&access.offsets)
            .map(|(row, off)| {
                let max: i64 = row
                    .iter()
                    .zip(&self.iterators)
                    .map(|(a, it)| (a * (it.bound as i64 - 1)).max(0))
                    .sum();
                (max + off + 1) as usize
            })
            .collect()
    }

    /// Resolve a comma- or whitespace-separated list of iterator names.
    pub fn resolve_selection(&self, names: &[String]) -> Result<[usize; 3]> {
        if names.len() != 3 {
            return Err(Error::InvalidSelection(format!(
                "expected three loops, got {}",
                names.len()
            )));
        }
        let mut out = [0usize; 3];
        for (slot, name) in out.iter_mut().zip(names) {
            *slot = self
                .iterator_index(name)
                .ok_or_else(|| Error::InvalidSelection(format!("no iterator named `{name}`")))?;
        }
        if out[0] == out[1] || out[0] == out[2] || out[1] == out[2] {
            return Err(Error::InvalidSelection("selected loops must be distinct".into()));
        }
        Ok(out)
    }
}

impl fmt::Display for TensorAccess {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Iterator names are not known here; see `AccessDisplay`.
        write!(f, "{}{:?}", self.tensor_name, self.access_matrix)
    }
}

struct AccessDisplay<'a>(&'a TensorAccess, &'a [LoopIterator]);

impl fmt::Display for AccessDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[", self.0.tensor_name)?;
        for (d, row) in self.0.access_matrix.iter().enumerate() {
            if d > 0 {
                f.write_str(",")?;
            }
            let terms: Vec<&str> = row
                .iter()
                .zip(self.1)
                .filter(|(a, _)| **a != 0)
                .map(|(_, it)| it.name.as_str())
                .collect();
            f.write_str(&terms.join("+"))?;
        }
        f.write_str("]")
    }
}

impl fmt::Display for TensorAlgebra {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.name.is_empty() {
            write!(f, "{}: ", self.name)?;
        }
        write!(f, "{} += ", AccessDisplay(&self.output, &self.iterators))?;
        for (i, input) in self.inputs.iter().enumerate() {
            if i > 0 {
                f.write_str(" * ")?;
            }
            write!(f, "{}", AccessDisplay(input, &self.iterators))?;
        }
        f.write_str(";")?;
        for it in &self.iterators {
            write!(f, " {}={}", it.name, it.bound)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(u64),
    LBracket,
    RBracket,
    Comma,
    Plus,
    PlusEq,
    Star,
    Semi,
    Colon,
    Eq,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn tokenize(source: &str) -> Result<Vec<Spanned>> {
    let mut out = Vec::new();
    for (ln, text) in source.lines().enumerate() {
        let line = ln + 1;
        let chars: Vec<char> = text.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let column = i + 1;
            let single = match c {
                '#' => break,
                c if c.is_whitespace() => {
                    i += 1;
                    continue;
                }
                '[' => Some(Tok::LBracket),
                ']' => Some(Tok::RBracket),
                ',' => Some(Tok::Comma),
                '*' | '×' => Some(Tok::Star),
                ';' => Some(Tok::Semi),
                ':' => Some(Tok::Colon),
                '=' => Some(Tok::Eq),
                _ => None,
            };
            if let Some(tok) = single {
                out.push(Spanned { tok, line, column });
                i += 1;
                continue;
            }
            if c == '+' {
                if chars.get(i + 1) == Some(&'=') {
                    out.push(Spanned { tok: Tok::PlusEq, line, column });
                    i += 2;
                } else {
                    out.push(Spanned { tok: Tok::Plus, line, column });
                    i += 1;
                }
                continue;
            }
            if c.is_ascii_digit() {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let digits: String = chars[start..i].iter().collect();
                let value = digits
                    .parse()
                    .map_err(|_| syntax(line, column, format!("integer `{digits}` out of range")))?;
                out.push(Spanned { tok: Tok::Int(value), line, column });
                continue;
            }
            if c.is_alphabetic() || c == '_' {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '-') {
                    i += 1;
                }
                let ident: String = chars[start..i].iter().collect();
                out.push(Spanned { tok: Tok::Ident(ident), line, column });
                continue;
            }
            return Err(syntax(line, column, format!("unexpected character `{c}`")));
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    end: (usize, usize),
}

type RawExpr = Vec<(String, usize, usize)>;

struct RawAccess {
    name: String,
    dims: Vec<RawExpr>,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn here(&self) -> (usize, usize) {
        self.toks
            .get(self.pos)
            .map(|s| (s.line, s.column))
            .unwrap_or(self.end)
    }

    fn err(&self, message: impl Into<String>) -> Error {
        let (line, column) = self.here();
        syntax(line, column, message)
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected {what}")))
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, usize, usize)> {
        let (line, column) = self.here();
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok((s, line, column))
            }
            _ => Err(self.err(format!("expected {what}"))),
        }
    }

    fn access(&mut self) -> Result<RawAccess> {
        let (name, _, _) = self.ident("tensor name")?;
        self.expect(Tok::LBracket, "`[`")?;
        let mut dims = Vec::new();
        loop {
            let mut expr = vec![self.ident("iterator")?];
            while self.peek() == Some(&Tok::Plus) {
                self.pos += 1;
                expr.push(self.ident("iterator after `+`")?);
            }
            dims.push(expr);
            match self.peek() {
                Some(Tok::Comma) => self.pos += 1,
                Some(Tok::RBracket) => {
                    self.pos += 1;
                    break;
                }
                Some(Tok::Int(_)) => return Err(self.err("constant index offsets are not supported")),
                _ => return Err(self.err("expected `,` or `]`")),
            }
        }
        Ok(RawAccess { name, dims })
    }
}

/// Parse one `.ta` statement.
pub fn parse_tensor_algebra(source: &str) -> Result<TensorAlgebra> {
    let toks = tokenize(source)?;
    let end = toks.last().map(|s| (s.line, s.column + 1)).unwrap_or((1, 1));
    let mut p = Parser { toks, pos: 0, end };

    let mut name = String::new();
    if let (Some(Tok::Ident(n)), Some(Tok::Colon)) =
        (p.peek().cloned(), p.toks.get(p.pos + 1).map(|s| s.tok.clone()))
    {
        name = n;
        p.pos += 2;
    }

    let output = p.access()?;
    p.expect(Tok::PlusEq, "`+=`")?;
    let mut inputs = vec![p.access()?];
    while p.peek() == Some(&Tok::Star) {
        p.pos += 1;
        inputs.push(p.access()?);
    }
    if inputs.len() > 3 {
        return Err(Error::InvalidAlgebra(format!(
            "at most three input tensors are supported, got {}",
            inputs.len()
        )));
    }
    p.expect(Tok::Semi, "`;` after the statement")?;

    let mut iterators: Vec<LoopIterator> = Vec::new();
    while let Some(tok) = p.peek() {
        match tok {
            Tok::Comma | Tok::Semi => {
                p.pos += 1;
            }
            Tok::Ident(_) => {
                let (it, line, column) = p.ident("iterator")?;
                p.expect(Tok::Eq, "`=`")?;
                let bound = match p.peek() {
                    Some(Tok::Int(v)) => *v as usize,
                    _ => return Err(p.err("expected a positive loop bound")),
                };
                if bound == 0 {
                    return Err(p.err("loop bounds must be at least 1"));
                }
                p.pos += 1;
                if iterators.iter().any(|x| x.name == it) {
                    return Err(syntax(line, column, format!("iterator `{it}` declared twice")));
                }
                iterators.push(LoopIterator { name: it, bound });
            }
            _ => return Err(p.err("expected `name=bound`")),
        }
    }
    if iterators.is_empty() {
        return Err(p.err("missing loop bound declarations"));
    }

    let resolve = |raw: &RawAccess| -> Result<TensorAccess> {
        let mut matrix = Vec::with_capacity(raw.dims.len());
        for expr in &raw.dims {
            let mut row = vec![0i64; iterators.len()];
            for (it, _, _) in expr {
                let col = iterators.iter().position(|x| &x.name == it).ok_or_else(|| {
                    Error::UnknownIterator {
                        tensor: raw.name.clone(),
                        iterator: it.clone(),
                    }
                })?;
                row[col] += 1;
                if row[col] > 1 {
                    return Err(Error::InvalidAlgebra(format!(
                        "iterator `{it}` repeated in one index of `{}`",
                        raw.name
                    )));
                }
            }
            matrix.push(row);
        }
        Ok(TensorAccess {
            tensor_name: raw.name.clone(),
            offsets: vec![0; matrix.len()],
            access_matrix: matrix,
        })
    };

    let output_access = resolve(&output)?;
    let mut input_accesses: Vec<TensorAccess> = Vec::new();
    for raw in &inputs {
        let acc = resolve(raw)?;
        if acc.tensor_name == output_access.tensor_name {
            return Err(Error::InvalidAlgebra(format!(
                "output `{}` cannot also be an input",
                acc.tensor_name
            )));
        }
        if let Some(prev) = input_accesses.iter().find(|a| a.tensor_name == acc.tensor_name) {
            if prev.rank() != acc.rank() {
                return Err(Error::RankMismatch {
                    tensor: acc.tensor_name.clone(),
                    expected: prev.rank(),
                    found: acc.rank(),
                });
            }
            return Err(Error::InvalidAlgebra(format!(
                "tensor `{}` appears twice as an input",
                acc.tensor_name
            )));
        }
        input_accesses.push(acc);
    }

    let used: BTreeSet<usize> = std::iter::once(&output_access)
        .chain(&input_accesses)
        .flat_map(|a| a.access_matrix.iter())
        .flat_map(|row| row.iter().enumerate().filter(|(_, v)| **v != 0).map(|(c, _)| c))
        .collect();
    if let Some(unused) = (0..iterators.len()).find(|c| !used.contains(c)) {
        return Err(Error::InvalidAlgebra(format!(
            "iterator `{}` is declared but never used",
            iterators[unused].name
        )));
    }

    let reduction_iterators = iterators
        .iter()
        .enumerate()
        .filter(|(c, _)| output_access.access_matrix.iter().all(|row| row[*c] == 0))
        .map(|(_, it)| it.name.clone())
        .collect();

    Ok(TensorAlgebra {
        name,
        iterators,
        output: output_access,
        inputs: input_accesses,
        reduction_iterators,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_access_matrices() {
        let alg = parse_tensor_algebra("C[m,n] += A[m,k] * B[n,k]; m=16 n=16 k=16").unwrap();
        assert_eq!(alg.iterators.len(), 3);
        assert_eq!(alg.inputs[0].access_matrix, vec![vec![1, 0, 0], vec![0, 0, 1]]);
        assert_eq!(alg.inputs[1].access_matrix, vec![vec![0, 1, 0], vec![0, 0, 1]]);
        assert_eq!(alg.output.access_matrix, vec![vec![1, 0, 0], vec![0, 1, 0]]);
        assert_eq!(alg.reduction_iterators, vec!["k".to_string()]);
    }

    #[test]
    fn identity_statement() {
        let alg = parse_tensor_algebra("C[i] += A[i]; i=4").unwrap();
        assert_eq!(alg.inputs[0].access_matrix, vec![vec![1]]);
        assert_eq!(alg.output.access_matrix, vec![vec![1]]);
        assert!(alg.reduction_iterators.is_empty());
    }

    #[test]
    fn conv_index_sums() {
        let alg = parse_tensor_algebra(
            "C[k,y,x] += A[c,y+p,x+q] * B[k,c,p,q]; k=4 c=3 y=8 x=8 p=3 q=3",
        )
        .unwrap();
        assert_eq!(alg.inputs[0].access_matrix[1], vec![0, 0, 1, 0, 1, 0]);
        assert_eq!(alg.inputs[0].access_matrix[2], vec![0, 0, 0, 1, 0, 1]);
        assert_eq!(alg.extents(&alg.inputs[0]), vec![3, 10, 10]);
    }

    #[test]
    fn three_inputs() {
        let alg =
            parse_tensor_algebra("D[i,j] += A[i,k,l] * B[k,j] * C[l,j]; i=2 j=2 k=2 l=2").unwrap();
        assert_eq!(alg.inputs.len(), 3);
        assert_eq!(alg.reduction_iterators, vec!["k".to_string(), "l".to_string()]);
    }

    #[test]
    fn named_statement_and_comments() {
        let src = "# matrix multiply\ngemm: C[m,n] += A[m,k] * B[n,k];\nm=2, n=3,\nk=4\n";
        let alg = parse_tensor_algebra(src).unwrap();
        assert_eq!(alg.name, "gemm");
        assert_eq!(alg.bounds(), vec![2, 3, 4]);
    }

    #[test]
    fn syntax_error_reports_position() {
        let err = parse_tensor_algebra("C[m,n] = A[m,k]; m=1 k=1 n=1").unwrap_err();
        match err {
            Error::Syntax { line, column, .. } => assert_eq!((line, column), (1, 8)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_iterator() {
        let err = parse_tensor_algebra("C[m] += A[m,z]; m=2").unwrap_err();
        assert!(matches!(err, Error::UnknownIterator { ref iterator, .. } if iterator == "z"));
    }

    #[test]
    fn rank_mismatch() {
        let err = parse_tensor_algebra("C[m] += A[m,k] * A[k]; m=2 k=2").unwrap_err();
        assert!(matches!(err, Error::RankMismatch { expected: 2, found: 1, .. }));
    }

    #[test]
    fn rejects_zero_bound_and_constants() {
        assert!(parse_tensor_algebra("C[m] += A[m]; m=0").is_err());
        assert!(parse_tensor_algebra("C[m] += A[m,1]; m=2").is_err());
        assert!(parse_tensor_algebra("C[m] += A[m+m]; m=2").is_err());
    }

    #[test]
    fn display_round_trip() {
        let src = "conv: C[k,y,x] += A[c,y+p,x+q] * B[k,c,p,q]; k=4 c=3 y=8 x=8 p=3 q=3";
        let alg = parse_tensor_algebra(src).unwrap();
        assert_eq!(alg.to_string(), src);
        assert_eq!(parse_tensor_algebra(&alg.to_string()).unwrap(), alg);
    }
}
