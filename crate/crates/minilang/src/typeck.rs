//! Name resolution and type checking.
//!
//! A project is a list of source files sharing one namespace. Checking
//! collects every error rather than stopping at the first; the messages are
//! part of the public contract because repair prompts quote them.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::ast::*;
use crate::error::TypeError;

/// Index of a file within a [`TypedProgram`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FileId(pub u32);

/// Location of a top-level declaration: file plus index within that file's
/// list of functions, records or tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DeclRef {
    pub file: FileId,
    pub index: u32,
}

/// Name of the only builtin function, `len(a: int[]) -> int`.
pub const BUILTIN_LEN: &str = "len";

#[derive(Debug, Clone)]
pub struct RecordInfo {
    pub decl: DeclRef,
    pub parent: Option<String>,
    /// Every field including inherited ones, ancestors' fields first.
    pub fields: Vec<(String, Type)>,
    /// Transitive ancestors, nearest first.
    pub ancestors: Vec<String>,
}

impl RecordInfo {
    pub fn field_type(&self, name: &str) -> Option<&Type> {
        self.fields.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }
}

/// A project that parsed and type checked. Expressions in the stored files
/// carry their inferred [`Type`].
#[derive(Debug, Clone)]
pub struct TypedProgram {
    files: Vec<Arc<Program>>,
    functions: Arc<HashMap<String, DeclRef>>,
    records: Arc<HashMap<String, RecordInfo>>,
    tests: Arc<HashMap<String, DeclRef>>,
}

pub fn typecheck(program: Program) -> Result<TypedProgram, Vec<TypeError>> {
    typecheck_project(vec![program])
}

pub fn typecheck_project(files: Vec<Program>) -> Result<TypedProgram, Vec<TypeError>> {
    let n = files.len();
    check_files(Vec::new(), files, 0..n)
}

impl TypedProgram {
    pub fn files(&self) -> &[Arc<Program>] {
        &self.files
    }

    pub fn file(&self, id: FileId) -> &Program {
        &self.files[id.0 as usize]
    }

    pub fn file_ids(&self) -> impl Iterator<Item = FileId> {
        (0..self.files.len() as u32).map(FileId)
    }

    pub fn find_file(&self, path: &std::path::Path) -> Option<FileId> {
        self.files
            .iter()
            .position(|f| f.source_file == path)
            .map(|i| FileId(i as u32))
    }

    pub fn function(&self, name: &str) -> Option<&FunctionDecl> {
        self.functions.get(name).map(|r| self.function_by_ref(*r))
    }

    pub fn function_ref(&self, name: &str) -> Option<DeclRef> {
        self.functions.get(name).copied()
    }

    pub fn function_by_ref(&self, r: DeclRef) -> &FunctionDecl {
        &self.files[r.file.0 as usize].functions[r.index as usize]
    }

    pub fn test(&self, name: &str) -> Option<(&TestDecl, DeclRef)> {
        self.tests
            .get(name)
            .map(|r| (&self.files[r.file.0 as usize].tests[r.index as usize], *r))
    }

    pub fn record_info(&self, name: &str) -> Option<&RecordInfo> {
        self.records.get(name)
    }

    pub fn record_decl(&self, name: &str) -> Option<&RecordDecl> {
        self.records
            .get(name)
            .map(|info| &self.files[info.decl.file.0 as usize].records[info.decl.index as usize])
    }

    /// Function names sorted alphabetically.
    pub fn function_names(&self) -> Vec<&str> {
        let mut names: Vec<&str> = self.functions.keys().map(String::as_str).collect();
        names.sort_unstable();
        names
    }

    pub fn has_name(&self, name: &str) -> bool {
        name == BUILTIN_LEN
            || self.functions.contains_key(name)
            || self.records.contains_key(name)
            || self.tests.contains_key(name)
    }

    /// Direct subtypes of `record`, sorted by name.
    pub fn direct_subtypes(&self, record: &str) -> Vec<&str> {
        let mut subs: Vec<&str> = self
            .records
            .iter()
            .filter(|(_, info)| info.parent.as_deref() == Some(record))
            .map(|(name, _)| name.as_str())
            .collect();
        subs.sort_unstable();
        subs
    }

    /// `record` and all its transitive subtypes, sorted by name.
    pub fn concrete_types_for(&self, record: &str) -> Vec<&str> {
        let mut all: Vec<&str> = self
            .records
            .iter()
            .filter(|(name, info)| {
                name.as_str() == record || info.ancestors.iter().any(|a| a == record)
            })
            .map(|(name, _)| name.as_str())
            .collect();
        all.sort_unstable();
        all
    }

    /// Subtype-aware assignability: a record is assignable where any
    /// transitive ancestor is expected.
    pub fn is_assignable(&self, from: &Type, to: &Type) -> bool {
        is_assignable(&self.records, from, to)
    }

    /// Adds one more file to the project, checking only the new file's
    /// declarations and bodies against the existing namespace.
    pub fn extend(&self, file: Program) -> Result<(TypedProgram, FileId), Vec<TypeError>> {
        let id = FileId(self.files.len() as u32);
        let mut files: Vec<Program> = self.files.iter().map(|f| (**f).clone()).collect();
        let n = files.len();
        files.push(file);
        let typed = check_files(self.files.clone(), files, n..n + 1)?;
        Ok((typed, id))
    }

    /// Replaces one file and re-checks it. Other files' bodies are assumed
    /// unaffected, which holds as long as declaration signatures are kept.
    pub fn replace_file(&self, id: FileId, file: Program) -> Result<TypedProgram, Vec<TypeError>> {
        let idx = id.0 as usize;
        let mut files: Vec<Program> = self.files.iter().map(|f| (**f).clone()).collect();
        files[idx] = file;
        check_files(self.files.clone(), files, idx..idx + 1)
    }

    /// Source programs without type annotations.
    pub fn untyped_files(&self) -> Vec<Program> {
        self.files.iter().map(|f| (**f).clone()).collect()
    }
}

fn is_assignable(records: &HashMap<String, RecordInfo>, from: &Type, to: &Type) -> bool {
    if from == to {
        return true;
    }
    match (from, to) {
        (Type::Record(a), Type::Record(b)) => records
            .get(a)
            .map(|info| info.ancestors.iter().any(|x| x == b))
            .unwrap_or(false),
        _ => false,
    }
}

/// Shared implementation: `previous` holds already-typed versions of files
/// outside `check_range`, which are reused instead of re-checked.
fn check_files(
    previous: Vec<Arc<Program>>,
    mut files: Vec<Program>,
    check_range: std::ops::Range<usize>,
) -> Result<TypedProgram, Vec<TypeError>> {
    let mut errors = Vec::new();
    let in_range = |i: usize| check_range.contains(&i);

    // 1. Collect top-level names.
    let mut functions: HashMap<String, DeclRef> = HashMap::new();
    let mut tests: HashMap<String, DeclRef> = HashMap::new();
    let mut record_decls: HashMap<String, DeclRef> = HashMap::new();
    let mut seen: HashSet<String> = HashSet::from([BUILTIN_LEN.to_string()]);
    for (fi, file) in files.iter().enumerate() {
        let fname = file_name(file);
        let file_id = FileId(fi as u32);
        let mut declare = |name: &str, line: Line, errors: &mut Vec<TypeError>| -> bool {
            if seen.insert(name.to_string()) {
                true
            } else {
                errors.push(TypeError::new(
                    &fname,
                    line,
                    format!("duplicate definition '{name}'"),
                ));
                false
            }
        };
        for (i, r) in file.records.iter().enumerate() {
            if declare(&r.name, r.span.first_line, &mut errors) {
                record_decls.insert(
                    r.name.clone(),
                    DeclRef {
                        file: file_id,
                        index: i as u32,
                    },
                );
            }
        }
        for (i, f) in file.functions.iter().enumerate() {
            if declare(&f.name, f.span.first_line, &mut errors) {
                functions.insert(
                    f.name.clone(),
                    DeclRef {
                        file: file_id,
                        index: i as u32,
                    },
                );
            }
        }
        for (i, t) in file.tests.iter().enumerate() {
            if declare(&t.name, t.span.first_line, &mut errors) {
                tests.insert(
                    t.name.clone(),
                    DeclRef {
                        file: file_id,
                        index: i as u32,
                    },
                );
            }
        }
    }

    // 2. Records: inheritance, fields.
    let records = resolve_records(&files, &record_decls, &mut errors);

    // 3. Signatures and bodies.
    let type_exists = |t: &Type| match t {
        Type::Record(name) => record_decls.contains_key(name),
        _ => true,
    };
    let mut sigs: HashMap<String, (Vec<Type>, Type)> = HashMap::new();
    for file in &files {
        for f in &file.functions {
            sigs.insert(
                f.name.clone(),
                (
                    f.params.iter().map(|p| p.ty.clone()).collect(),
                    f.return_type.clone(),
                ),
            );
        }
    }
    for (fi, file) in files.iter_mut().enumerate() {
        if !in_range(fi) {
            continue;
        }
        let fname = file_name(file);
        for r in &file.records {
            for field in &r.fields {
                if !type_exists(&field.ty) {
                    errors.push(TypeError::new(
                        &fname,
                        r.span.first_line,
                        format!("unknown type '{}'", field.ty),
                    ));
                }
            }
        }
        for f in &mut file.functions {
            let mut checker = BodyChecker {
                file: &fname,
                records: &records,
                sigs: &sigs,
                scopes: vec![Vec::new()],
                return_type: Some(f.return_type.clone()),
                errors: &mut errors,
            };
            if !type_exists(&f.return_type) {
                checker.error(
                    f.span.first_line,
                    format!("unknown type '{}'", f.return_type),
                );
            }
            for p in &f.params {
                if !type_exists(&p.ty) {
                    checker.error(f.span.first_line, format!("unknown type '{}'", p.ty));
                }
                checker.declare(&p.name, p.ty.clone(), f.span.first_line);
            }
            checker.block(&mut f.body);
            if !block_returns(&f.body) {
                checker.error(
                    f.span.last_line,
                    format!("missing return in function '{}'", f.name),
                );
            }
        }
        for t in &mut file.tests {
            let mut checker = BodyChecker {
                file: &fname,
                records: &records,
                sigs: &sigs,
                scopes: vec![Vec::new()],
                return_type: None,
                errors: &mut errors,
            };
            if !t.name.starts_with("test_") {
                checker.error(
                    t.span.first_line,
                    format!("test name '{}' must start with 'test_'", t.name),
                );
            }
            checker.block(&mut t.body);
            if !called_functions(&t.body)
                .iter()
                .any(|c| sigs.contains_key(c))
            {
                checker.error(
                    t.span.first_line,
                    format!("test '{}' does not call any project function", t.name),
                );
            }
        }
    }

    if !errors.is_empty() {
        return Err(errors);
    }

    let files = files
        .into_iter()
        .enumerate()
        .map(|(i, f)| {
            if in_range(i) || i >= previous.len() {
                Arc::new(f)
            } else {
                previous[i].clone()
            }
        })
        .collect();
    Ok(TypedProgram {
        files,
        functions: Arc::new(functions),
        records: Arc::new(records),
        tests: Arc::new(tests),
    })
}

fn file_name(file: &Program) -> String {
    file.source_file.display().to_string()
}

fn resolve_records(
    files: &[Program],
    decls: &HashMap<String, DeclRef>,
    errors: &mut Vec<TypeError>,
) -> HashMap<String, RecordInfo> {
    let decl_of = |r: &DeclRef| &files[r.file.0 as usize].records[r.index as usize];
    let mut names: Vec<&String> = decls.keys().collect();
    names.sort();

    let mut out = HashMap::new();
    let mut broken: HashSet<String> = HashSet::new();
    for name in &names {
        let dref = decls[*name];
        let decl = decl_of(&dref);
        let fname = file_name(&files[dref.file.0 as usize]);
        let mut ancestors = Vec::new();
        let mut cur = decl.extends.clone();
        let mut ok = true;
        while let Some(parent) = cur {
            if parent == **name || ancestors.contains(&parent) {
                errors.push(TypeError::new(
                    &fname,
                    decl.span.first_line,
                    format!("inheritance cycle involving '{name}'"),
                ));
                ok = false;
                break;
            }
            match decls.get(&parent) {
                Some(p) => {
                    cur = decl_of(p).extends.clone();
                    ancestors.push(parent);
                }
                None => {
                    errors.push(TypeError::new(
                        &fname,
                        decl.span.first_line,
                        format!("unknown type '{parent}'"),
                    ));
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            broken.insert((*name).clone());
            continue;
        }
        let mut fields: Vec<(String, Type)> = Vec::new();
        for anc in ancestors.iter().rev() {
            for f in &decl_of(&decls[anc]).fields {
                fields.push((f.name.clone(), f.ty.clone()));
            }
        }
        let inherited = fields.len();
        for f in &decl.fields {
            if let Some(pos) = fields.iter().position(|(n, _)| *n == f.name) {
                let msg = if pos < inherited {
                    format!("field '{}' of '{name}' shadows an inherited field", f.name)
                } else {
                    format!("duplicate field '{}' in '{name}'", f.name)
                };
                errors.push(TypeError::new(&fname, decl.span.first_line, msg));
                continue;
            }
            fields.push((f.name.clone(), f.ty.clone()));
        }
        out.insert(
            (*name).clone(),
            RecordInfo {
                decl: dref,
                parent: decl.extends.clone(),
                fields,
                ancestors,
            },
        );
    }

    // A record that (transitively) holds a field of its own type can never be
    // constructed with value semantics.
    for name in &names {
        let Some(info) = out.get(*name) else { continue };
        let mut stack: Vec<&str> = info
            .fields
            .iter()
            .filter_map(|(_, t)| {
                if let Type::Record(r) = t {
                    Some(r.as_str())
                } else {
                    None
                }
            })
            .collect();
        let mut visited: HashSet<&str> = HashSet::new();
        while let Some(r) = stack.pop() {
            if r == name.as_str() {
                let dref = decls[*name];
                let fname = file_name(&files[dref.file.0 as usize]);
                errors.push(TypeError::new(
                    &fname,
                    decl_of(&dref).span.first_line,
                    format!("record '{name}' contains itself"),
                ));
                break;
            }
            if !visited.insert(r) {
                continue;
            }
            if let Some(sub) = out.get(r) {
                for (_, t) in &sub.fields {
                    if let Type::Record(x) = t {
                        stack.push(x.as_str());
                    }
                }
            }
        }
    }
    let _ = broken;
    out
}

/// True when every path through `block` ends in a `return`.
pub fn block_returns(block: &Block) -> bool {
    block.stmts.iter().any(|s| match &s.kind {
        StmtKind::Return(_) => true,
        StmtKind::If {
            then_block,
            else_block: Some(else_block),
            ..
        } => block_returns(then_block) && block_returns(else_block),
        _ => false,
    })
}

struct BodyChecker<'a> {
    file: &'a str,
    records: &'a HashMap<String, RecordInfo>,
    sigs: &'a HashMap<String, (Vec<Type>, Type)>,
    scopes: Vec<Vec<(String, Type)>>,
    /// `None` inside test bodies.
    return_type: Option<Type>,
    errors: &'a mut Vec<TypeError>,
}

impl BodyChecker<'_> {
    fn error(&mut self, line: Line, message: impl Into<String>) {
        self.errors.push(TypeError::new(self.file, line, message));
    }

    fn lookup(&self, name: &str) -> Option<&Type> {
        self.scopes
            .iter()
            .rev()
            .flat_map(|s| s.iter().rev())
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
    }

    fn declare(&mut self, name: &str, ty: Type, line: Line) {
        if self.lookup(name).is_some() {
            self.error(line, format!("variable '{name}' is already defined"));
            return;
        }
        self.scopes
            .last_mut()
            .expect("scope")
            .push((name.to_string(), ty));
    }

    fn assignable(&self, from: &Type, to: &Type) -> bool {
        is_assignable(self.records, from, to)
    }

    fn type_exists(&self, t: &Type) -> bool {
        match t {
            Type::Record(name) => self.records.contains_key(name),
            _ => true,
        }
    }

    fn expect_type(&mut self, expected: &Type, found: Option<Type>, line: Line) {
        if let Some(found) = found {
            if !self.assignable(&found, expected) {
                self.error(line, format!("expected {expected}, found {found}"));
            }
        }
    }

    fn block(&mut self, block: &mut Block) {
        self.scopes.push(Vec::new());
        for stmt in &mut block.stmts {
            self.stmt(stmt);
        }
        self.scopes.pop();
    }

    fn stmt(&mut self, stmt: &mut Stmt) {
        let line = stmt.line;
        match &mut stmt.kind {
            StmtKind::Let { name, ty, value } => {
                let found = self.expr(value);
                if !self.type_exists(ty) {
                    self.error(line, format!("unknown type '{ty}'"));
                } else {
                    self.expect_type(ty, found, line);
                }
                let (name, ty) = (name.clone(), ty.clone());
                self.declare(&name, ty, line);
            }
            StmtKind::Assign { name, value } => {
                let found = self.expr(value);
                match self.lookup(name).cloned() {
                    Some(t) => self.expect_type(&t, found, line),
                    None => self.error(line, format!("unknown variable '{name}'")),
                }
            }
            StmtKind::IndexAssign { name, index, value } => {
                let it = self.expr(index);
                self.expect_type(&Type::Int, it, line);
                let vt = self.expr(value);
                match self.lookup(name).cloned() {
                    Some(Type::IntArray) => self.expect_type(&Type::Int, vt, line),
                    Some(t) => self.error(line, format!("cannot index value of type {t}")),
                    None => self.error(line, format!("unknown variable '{name}'")),
                }
            }
            StmtKind::If {
                cond,
                then_block,
                else_block,
                ..
            } => {
                let ct = self.expr(cond);
                self.expect_type(&Type::Bool, ct, line);
                self.block(then_block);
                if let Some(b) = else_block {
                    self.block(b);
                }
            }
            StmtKind::While { cond, body, .. } => {
                let ct = self.expr(cond);
                self.expect_type(&Type::Bool, ct, line);
                self.block(body);
            }
            StmtKind::Return(value) => match (self.return_type.clone(), value) {
                (Some(rt), Some(e)) => {
                    let found = self.expr(e);
                    self.expect_type(&rt, found, line);
                }
                (Some(rt), None) => self.error(line, format!("expected {rt}, found unit")),
                (None, Some(e)) => {
                    self.expr(e);
                    self.error(line, "tests cannot return a value");
                }
                (None, None) => {}
            },
            StmtKind::Assert(e) => {
                let t = self.expr(e);
                self.expect_type(&Type::Bool, t, line);
            }
            StmtKind::ExpectError(e) | StmtKind::Expr(e) => {
                self.expr(e);
            }
        }
    }

    fn expr(&mut self, expr: &mut Expr) -> Option<Type> {
        let line = expr.line;
        let ty = match &mut expr.kind {
            ExprKind::Int(_) => Some(Type::Int),
            ExprKind::Bool(_) => Some(Type::Bool),
            ExprKind::Array(items) => {
                for item in items.iter_mut() {
                    let t = self.expr(item);
                    self.expect_type(&Type::Int, t, line);
                }
                Some(Type::IntArray)
            }
            ExprKind::Record { name, fields } => {
                let name = name.clone();
                let mut found: Vec<(String, Option<Type>)> = Vec::new();
                for (fname, value) in fields.iter_mut() {
                    let t = self.expr(value);
                    found.push((fname.clone(), t));
                }
                match self.records.get(&name) {
                    None => {
                        self.error(line, format!("unknown type '{name}'"));
                        None
                    }
                    Some(info) => {
                        let info_fields = info.fields.clone();
                        let mut seen = HashSet::new();
                        for (fname, t) in found {
                            if !seen.insert(fname.clone()) {
                                self.error(
                                    line,
                                    format!("duplicate field '{fname}' in '{name}' literal"),
                                );
                                continue;
                            }
                            match info_fields.iter().find(|(n, _)| *n == fname) {
                                Some((_, expected)) => self.expect_type(expected, t, line),
                                None => self
                                    .error(line, format!("record '{name}' has no field '{fname}'")),
                            }
                        }
                        for (fname, _) in &info_fields {
                            if !seen.contains(fname) {
                                self.error(
                                    line,
                                    format!("missing field '{fname}' in '{name}' literal"),
                                );
                            }
                        }
                        Some(Type::Record(name))
                    }
                }
            }
            ExprKind::Var(name) => match self.lookup(name) {
                Some(t) => Some(t.clone()),
                None => {
                    let msg = format!("unknown variable '{name}'");
                    self.error(line, msg);
                    None
                }
            },
            ExprKind::Field(base, field) => {
                let bt = self.expr(base);
                match bt {
                    Some(Type::Record(r)) => {
                        match self.records.get(&r).and_then(|i| i.field_type(field)) {
                            Some(t) => Some(t.clone()),
                            None => {
                                let msg = format!("record '{r}' has no field '{field}'");
                                self.error(line, msg);
                                None
                            }
                        }
                    }
                    Some(t) => {
                        let msg = format!("cannot access field '{field}' on type {t}");
                        self.error(line, msg);
                        None
                    }
                    None => None,
                }
            }
            ExprKind::Index(base, idx) => {
                let bt = self.expr(base);
                let it = self.expr(idx);
                self.expect_type(&Type::Int, it, line);
                match bt {
                    Some(Type::IntArray) => Some(Type::Int),
                    Some(t) => {
                        self.error(line, format!("cannot index value of type {t}"));
                        None
                    }
                    None => None,
                }
            }
            ExprKind::Call(name, args) => {
                let arg_types: Vec<Option<Type>> = args.iter_mut().map(|a| self.expr(a)).collect();
                let sig = if name == BUILTIN_LEN {
                    Some((vec![Type::IntArray], Type::Int))
                } else {
                    self.sigs.get(name.as_str()).cloned()
                };
                match sig {
                    None => {
                        let msg = format!("unknown function '{name}'");
                        self.error(line, msg);
                        None
                    }
                    Some((params, ret)) => {
                        if params.len() != arg_types.len() {
                            let msg = format!(
                                "function '{name}' expects {} arguments, found {}",
                                params.len(),
                                arg_types.len()
                            );
                            self.error(line, msg);
                        } else {
                            for (p, a) in params.iter().zip(arg_types) {
                                self.expect_type(p, a, line);
                            }
                        }
                        Some(ret)
                    }
                }
            }
            ExprKind::Unary(op, operand) => {
                let t = self.expr(operand);
                let (want, sym) = match op {
                    UnaryOp::Neg => (Type::Int, "-"),
                    UnaryOp::Not => (Type::Bool, "!"),
                };
                match t {
                    Some(t) if t == want => Some(want),
                    Some(t) => {
                        self.error(line, format!("operator '{sym}' cannot be applied to {t}"));
                        None
                    }
                    None => None,
                }
            }
            ExprKind::Binary(op, lhs, rhs) => {
                let op = *op;
                let lt = self.expr(lhs);
                let rt = self.expr(rhs);
                let (Some(lt), Some(rt)) = (lt, rt) else {
                    return None;
                };
                let ok_result = if op.is_arithmetic() {
                    (lt == Type::Int && rt == Type::Int).then_some(Type::Int)
                } else if op.is_logical() {
                    (lt == Type::Bool && rt == Type::Bool).then_some(Type::Bool)
                } else if matches!(op, BinOp::Eq | BinOp::Ne) {
                    (lt != Type::Unit && (self.assignable(&lt, &rt) || self.assignable(&rt, &lt)))
                        .then_some(Type::Bool)
                } else {
                    (lt == Type::Int && rt == Type::Int).then_some(Type::Bool)
                };
                if ok_result.is_none() {
                    self.error(
                        line,
                        format!(
                            "operator '{}' cannot be applied to {lt} and {rt}",
                            op.symbol()
                        ),
                    );
                }
                ok_result
            }
        };
        expr.ty = ty.clone();
        ty
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse;

    fn errors(src: &str) -> Vec<String> {
        typecheck(parse(src).unwrap())
            .err()
            .unwrap_or_default()
            .into_iter()
            .map(|e| e.message)
            .collect()
    }

    #[test]
    fn return_type_mismatch() {
        assert_eq!(
            errors("fn f(x: int) -> bool { return x; }"),
            vec!["expected bool, found int"]
        );
    }

    #[test]
    fn subtype_is_assignable_to_ancestor() {
        let src = "record Animal { age: int; }\n\
                   record Cat extends Animal { lives: int; }\n\
                   record Kitten extends Cat { toy: bool; }\n\
                   fn feed(a: Animal) -> int { return a.age; }\n\
                   fn g() -> int { let k: Kitten = Kitten { age: 1, lives: 9, toy: true }; let c: Cat = Cat { age: 2, lives: 3 }; return feed(c) + feed(k); }";
        let typed = typecheck(parse(src).unwrap()).unwrap();
        let (cat, animal, kitten) = (
            Type::Record("Cat".into()),
            Type::Record("Animal".into()),
            Type::Record("Kitten".into()),
        );
        assert!(typed.is_assignable(&cat, &animal));
        assert!(typed.is_assignable(&kitten, &animal));
        assert!(typed.is_assignable(&cat, &cat));
        assert!(!typed.is_assignable(&animal, &cat));
        let info = typed.record_info("Kitten").unwrap();
        let names: Vec<&str> = info.fields.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(names, ["age", "lives", "toy"]);
        assert_eq!(
            typed.concrete_types_for("Animal"),
            ["Animal", "Cat", "Kitten"]
        );
    }

    #[test]
    fn inheritance_cycles_are_rejected() {
        assert_eq!(
            errors("record A extends A { x: int; }"),
            vec!["inheritance cycle involving 'A'"]
        );
        let errs = errors("record A extends B { }\nrecord B extends A { }");
        assert_eq!(errs.len(), 2);
        assert!(errs.iter().all(|e| e.starts_with("inheritance cycle")));
    }

    #[test]
    fn shadowing_and_self_containment() {
        assert_eq!(
            errors("record A { x: int; }\nrecord B extends A { x: bool; }"),
            vec!["field 'x' of 'B' shadows an inherited field"]
        );
        assert_eq!(
            errors("record N { next: N; }"),
            vec!["record 'N' contains itself"]
        );
    }

    #[test]
    fn all_errors_are_collected() {
        let errs = errors("fn f(x: int) -> int { let y: bool = x; return incr(x) + z; }");
        assert_eq!(
            errs,
            vec![
                "expected bool, found int",
                "unknown function 'incr'",
                "unknown variable 'z'"
            ]
        );
    }

    #[test]
    fn missing_return_and_test_rules() {
        assert_eq!(
            errors("fn f(x: int) -> int { if (x > 0) { return 1; } }"),
            vec!["missing return in function 'f'"]
        );
        assert_eq!(
            errors("fn f() -> int { return 1; }\ntest fn check() { assert f() == 1; }"),
            vec!["test name 'check' must start with 'test_'"]
        );
        assert_eq!(
            errors("fn f() -> int { return 1; }\ntest fn test_x() { assert 1 == 1; }"),
            vec!["test 'test_x' does not call any project function"]
        );
    }

    #[test]
    fn duplicates_share_one_namespace() {
        assert_eq!(
            errors(
                "fn a() -> int { return 1; }\nrecord a { }\nfn len(x: int) -> int { return x; }"
            ),
            vec!["duplicate definition 'a'", "duplicate definition 'len'"]
        );
    }

    #[test]
    fn expressions_are_annotated() {
        let typed =
            typecheck(parse("fn f(a: int[]) -> bool { return a[0] < len(a); }").unwrap()).unwrap();
        let StmtKind::Return(Some(e)) = &typed.function("f").unwrap().body.stmts[0].kind else {
            panic!()
        };
        assert_eq!(e.ty, Some(Type::Bool));
        let ExprKind::Binary(_, l, _) = &e.kind else {
            panic!()
        };
        assert_eq!(l.ty, Some(Type::Int));
    }

    #[test]
    fn extend_checks_only_the_new_file() {
        let base = typecheck(parse("fn inc(x: int) -> int { return x + 1; }").unwrap()).unwrap();
        let (ext, id) = base
            .extend(parse("test fn test_inc() { assert inc(1) == 2; }").unwrap())
            .unwrap();
        assert_eq!(id, FileId(1));
        assert!(ext.test("test_inc").is_some());
        let err = base
            .extend(parse("test fn test_inc() { assert incr(1) == 2; }").unwrap())
            .unwrap_err();
        assert_eq!(err[0].to_string(), "line 1: unknown function 'incr'");
        let err = base
            .extend(parse("fn inc(x: int) -> int { return x; }").unwrap())
            .unwrap_err();
        assert_eq!(err[0].message, "duplicate definition 'inc'");
    }
}
