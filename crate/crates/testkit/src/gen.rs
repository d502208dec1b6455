//! Random generator of well-typed MiniLang source text.
//!
//! The generator works from the grammar directly and never goes through the
//! crate's renderer, so it can serve as an oracle for parser and renderer
//! round trips. With `noise` enabled it sprinkles comments, odd whitespace,
//! line breaks inside statements and redundant parentheses.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct GenConfig {
    pub max_records: usize,
    pub max_functions: usize,
    pub max_params: usize,
    pub max_stmts: usize,
    pub max_depth: usize,
    pub max_tests: usize,
    pub noise: bool,
    /// Emit `while` loops.
    pub loops: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            max_records: 3,
            max_functions: 4,
            max_params: 3,
            max_stmts: 5,
            max_depth: 3,
            max_tests: 3,
            noise: false,
            loops: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Generated {
    pub source: String,
    pub functions: Vec<String>,
    pub tests: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Ty {
    Int,
    Bool,
    Arr,
    Rec(usize),
}

struct Record {
    name: String,
    parent: Option<usize>,
    own: Vec<(String, Ty)>,
}

struct Func {
    name: String,
    params: Vec<Ty>,
    ret: Ty,
}

struct Var {
    name: String,
    ty: Ty,
    assignable: bool,
}

pub fn generate(seed: u64, config: &GenConfig) -> Generated {
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(seed),
        cfg: config.clone(),
        records: Vec::new(),
        funcs: Vec::new(),
        out: String::new(),
        indent: 0,
        counter: 0,
    };
    g.program()
}

struct Gen {
    rng: ChaCha8Rng,
    cfg: GenConfig,
    records: Vec<Record>,
    funcs: Vec<Func>,
    out: String,
    indent: usize,
    counter: usize,
}

impl Gen {
    fn program(&mut self) -> Generated {
        let n_records = self.rng.gen_range(0..=self.cfg.max_records);
        for i in 0..n_records {
            self.record(i);
        }
        let n_funcs = self.rng.gen_range(1..=self.cfg.max_functions.max(1));
        for i in 0..n_funcs {
            self.function(i);
        }
        let n_tests = self.rng.gen_range(1..=self.cfg.max_tests.max(1));
        let mut tests = Vec::new();
        for i in 0..n_tests {
            tests.push(self.test(i));
        }
        Generated {
            source: std::mem::take(&mut self.out),
            functions: self.funcs.iter().map(|f| f.name.clone()).collect(),
            tests,
        }
    }

    // ---- text emission

    fn space(&mut self) {
        if self.cfg.noise && self.rng.gen_bool(0.15) {
            let ws = *[" ", "  ", "\t", "\n    "].choose(&mut self.rng).unwrap();
            self.out.push_str(ws);
        } else {
            self.out.push(' ');
        }
    }

    fn line_start(&mut self) {
        if self.cfg.noise && self.rng.gen_bool(0.1) {
            self.push_indent();
            self.out.push_str("// note ");
            let n = self.rng.gen_range(0..100);
            self.out.push_str(&n.to_string());
            self.out.push('\n');
        }
        self.push_indent();
    }

    fn push_indent(&mut self) {
        for _ in 0..self.indent {
            self.out.push_str("    ");
        }
    }

    fn fresh(&mut self, prefix: &str) -> String {
        self.counter += 1;
        format!("{prefix}{}", self.counter)
    }

    fn ty_text(&self, t: &Ty) -> String {
        match t {
            Ty::Int => "int".into(),
            Ty::Bool => "bool".into(),
            Ty::Arr => "int[]".into(),
            Ty::Rec(i) => self.records[*i].name.clone(),
        }
    }

    fn random_ty(&mut self) -> Ty {
        let r = self.rng.gen_range(0..10);
        if r >= 8 && !self.records.is_empty() {
            Ty::Rec(self.rng.gen_range(0..self.records.len()))
        } else {
            match r % 4 {
                0 | 1 => Ty::Int,
                2 => Ty::Bool,
                _ => Ty::Arr,
            }
        }
    }

    // ---- declarations

    fn record(&mut self, i: usize) {
        let name = format!("Rec{i}");
        let parent = if i > 0 && self.rng.gen_bool(0.4) {
            Some(self.rng.gen_range(0..i))
        } else {
            None
        };
        let n = self.rng.gen_range(1..=3);
        let mut own = Vec::new();
        for k in 0..n {
            let ty = match self.rng.gen_range(0..6) {
                0..=2 => Ty::Int,
                3 => Ty::Bool,
                4 => Ty::Arr,
                _ if i > 0 => Ty::Rec(self.rng.gen_range(0..i)),
                _ => Ty::Int,
            };
            own.push((format!("f{i}_{k}"), ty));
        }
        let mut text = format!("record {name}");
        if let Some(p) = parent {
            text.push_str(&format!(" extends Rec{p}"));
        }
        self.out.push_str(&text);
        self.space();
        self.out.push_str("{\n");
        for (f, t) in &own {
            let t = self.ty_text(t);
            self.out.push_str(&format!("    {f}: {t};\n"));
        }
        self.out.push_str("}\n\n");
        self.records.push(Record { name, parent, own });
    }

    fn all_fields(&self, i: usize) -> Vec<(String, Ty)> {
        let mut chain = vec![i];
        while let Some(p) = self.records[*chain.last().unwrap()].parent {
            chain.push(p);
        }
        chain
            .iter()
            .rev()
            .flat_map(|r| self.records[*r].own.clone())
            .collect()
    }

    /// `i` and every record that transitively extends it.
    fn subtypes(&self, i: usize) -> Vec<usize> {
        (0..self.records.len())
            .filter(|&j| {
                let mut c = Some(j);
                while let Some(k) = c {
                    if k == i {
                        return true;
                    }
                    c = self.records[k].parent;
                }
                false
            })
            .collect()
    }

    fn assignable(&self, from: &Ty, to: &Ty) -> bool {
        match (from, to) {
            (Ty::Rec(a), Ty::Rec(b)) => self.subtypes(*b).contains(a),
            _ => from == to,
        }
    }

    fn function(&mut self, i: usize) {
        let name = format!("fun{i}");
        let n_params = self.rng.gen_range(0..=self.cfg.max_params);
        let params: Vec<Ty> = (0..n_params).map(|_| self.random_ty()).collect();
        let ret = self.random_ty();
        let mut scope: Vec<Var> = params
            .iter()
            .enumerate()
            .map(|(k, t)| Var {
                name: format!("p{k}"),
                ty: t.clone(),
                assignable: true,
            })
            .collect();
        let sig: Vec<String> = scope
            .iter()
            .map(|v| format!("{}: {}", v.name, self.ty_text(&v.ty)))
            .collect();
        self.line_start();
        let ret_text = self.ty_text(&ret);
        self.out
            .push_str(&format!("fn {name}({}) -> {ret_text}", sig.join(", ")));
        self.space();
        self.out.push_str("{\n");
        self.indent += 1;
        let n = self.rng.gen_range(0..=self.cfg.max_stmts);
        for _ in 0..n {
            self.stmt(&mut scope, &ret, 0);
        }
        self.line_start();
        self.out.push_str("return ");
        self.expr(&ret, &scope, 0);
        self.out.push_str(";\n");
        self.indent -= 1;
        self.out.push_str("}\n\n");
        self.funcs.push(Func { name, params, ret });
    }

    fn test(&mut self, i: usize) -> String {
        let name = format!("test_gen_{i}");
        self.out.push_str(&format!("test fn {name}() {{\n"));
        self.indent += 1;
        let f = self.rng.gen_range(0..self.funcs.len());
        let params = self.funcs[f].params.clone();
        let ret = self.funcs[f].ret.clone();
        let fname = self.funcs[f].name.clone();
        let scope: Vec<Var> = Vec::new();
        let mut call = String::new();
        std::mem::swap(&mut call, &mut self.out);
        self.out.push_str(&fname);
        self.out.push('(');
        for (k, p) in params.iter().enumerate() {
            if k > 0 {
                self.out.push_str(", ");
            }
            self.expr(p, &scope, 1);
        }
        self.out.push(')');
        std::mem::swap(&mut call, &mut self.out);
        self.line_start();
        match self.rng.gen_range(0..4) {
            0 => self.out.push_str(&format!("expect_error {call};\n")),
            1 => self.out.push_str(&format!("{call};\n")),
            _ => {
                let r = self.fresh("r");
                let t = self.ty_text(&ret);
                self.out.push_str(&format!("let {r}: {t} = {call};\n"));
                let scope = vec![Var {
                    name: r.clone(),
                    ty: ret.clone(),
                    assignable: true,
                }];
                self.line_start();
                self.out.push_str("assert ");
                self.expr(&Ty::Bool, &scope, 1);
                self.out.push_str(";\n");
                if matches!(ret, Ty::Int | Ty::Bool) {
                    self.line_start();
                    self.out.push_str(&format!("assert {r} == "));
                    self.operand(&ret, &[], 2);
                    self.out.push_str(";\n");
                }
            }
        }
        self.indent -= 1;
        self.out.push_str("}\n\n");
        name
    }

    // ---- statements

    fn stmts(&mut self, n: usize, scope: &mut Vec<Var>, ret: &Ty, depth: usize) {
        let mark = scope.len();
        for _ in 0..n {
            self.stmt(scope, ret, depth);
        }
        scope.truncate(mark);
    }

    fn stmt(&mut self, scope: &mut Vec<Var>, ret: &Ty, depth: usize) {
        let nested = depth < self.cfg.max_depth;
        let choice = self.rng.gen_range(0..100);
        match choice {
            0..=29 => {
                let ty = self.random_ty();
                let name = self.fresh("v");
                self.line_start();
                let t = self.ty_text(&ty);
                self.out.push_str(&format!("let {name}: {t} ="));
                self.space();
                self.expr(&ty, scope, 0);
                self.out.push_str(";\n");
                scope.push(Var {
                    name,
                    ty,
                    assignable: true,
                });
            }
            30..=44 => {
                let targets: Vec<usize> =
                    (0..scope.len()).filter(|&k| scope[k].assignable).collect();
                if let Some(&k) = targets.choose(&mut self.rng) {
                    let (name, ty) = (scope[k].name.clone(), scope[k].ty.clone());
                    if ty == Ty::Arr && self.rng.gen_bool(0.5) {
                        self.line_start();
                        self.out.push_str(&format!("{name}["));
                        self.expr(&Ty::Int, scope, 1);
                        self.out.push_str("] = ");
                        self.expr(&Ty::Int, scope, 1);
                        self.out.push_str(";\n");
                    } else {
                        self.line_start();
                        self.out.push_str(&format!("{name} = "));
                        self.expr(&ty, scope, 0);
                        self.out.push_str(";\n");
                    }
                } else {
                    self.stmt_call(scope);
                }
            }
            45..=64 if nested => {
                self.line_start();
                self.out.push_str("if (");
                self.expr(&Ty::Bool, scope, 0);
                self.out.push(')');
                self.space();
                self.out.push_str("{\n");
                self.block(scope, ret, depth + 1);
                if self.rng.gen_bool(0.5) {
                    self.push_indent();
                    self.out.push_str("} else {\n");
                    self.block(scope, ret, depth + 1);
                }
                self.push_indent();
                self.out.push_str("}\n");
            }
            65..=76 if nested && self.cfg.loops => {
                let counter = self.fresh("w");
                let bound = self.rng.gen_range(0..6);
                self.line_start();
                self.out.push_str(&format!("let {counter}: int = 0;\n"));
                self.line_start();
                self.out.push_str(&format!("while ({counter} < {bound}"));
                if self.rng.gen_bool(0.5) {
                    self.out.push_str(" && ");
                    self.operand(&Ty::Bool, scope, 2);
                }
                self.out.push_str(") {\n");
                scope.push(Var {
                    name: counter.clone(),
                    ty: Ty::Int,
                    assignable: false,
                });
                self.indent += 1;
                let n = self.rng.gen_range(0..=self.cfg.max_stmts.min(3));
                self.stmts(n, scope, ret, depth + 1);
                self.line_start();
                self.out.push_str(&format!("{counter} = {counter} + 1;\n"));
                self.indent -= 1;
                self.push_indent();
                self.out.push_str("}\n");
            }
            77..=82 => {
                self.line_start();
                self.out.push_str("return ");
                self.expr(ret, scope, 0);
                self.out.push_str(";\n");
            }
            83..=87 => {
                self.line_start();
                self.out.push_str("assert ");
                self.expr(&Ty::Bool, scope, 1);
                self.out.push_str(";\n");
            }
            _ => self.stmt_call(scope),
        }
    }

    fn block(&mut self, scope: &mut Vec<Var>, ret: &Ty, depth: usize) {
        self.indent += 1;
        let n = self.rng.gen_range(0..=self.cfg.max_stmts.min(3));
        self.stmts(n, scope, ret, depth);
        self.indent -= 1;
    }

    fn stmt_call(&mut self, scope: &[Var]) {
        self.line_start();
        if self.funcs.is_empty() {
            self.out.push_str("len([1, 2]);\n");
            return;
        }
        let f = self.rng.gen_range(0..self.funcs.len());
        self.call(f, scope, 1);
        self.out.push_str(";\n");
    }

    // ---- expressions

    fn call(&mut self, f: usize, scope: &[Var], depth: usize) {
        let name = self.funcs[f].name.clone();
        let params = self.funcs[f].params.clone();
        self.out.push_str(&name);
        self.out.push('(');
        for (k, p) in params.iter().enumerate() {
            if k > 0 {
                self.out.push(',');
                self.space();
            }
            self.expr(p, scope, depth + 1);
        }
        self.out.push(')');
    }

    fn expr(&mut self, ty: &Ty, scope: &[Var], depth: usize) {
        if self.cfg.noise && self.rng.gen_bool(0.05) {
            self.out.push('(');
            self.expr_inner(ty, scope, depth);
            self.out.push(')');
        } else {
            self.expr_inner(ty, scope, depth);
        }
    }

    fn vars_of(&self, ty: &Ty, scope: &[Var]) -> Vec<String> {
        scope
            .iter()
            .filter(|v| self.assignable(&v.ty, ty))
            .map(|v| v.name.clone())
            .collect()
    }

    fn funcs_returning(&self, ty: &Ty) -> Vec<usize> {
        (0..self.funcs.len())
            .filter(|&k| self.assignable(&self.funcs[k].ret, ty))
            .collect()
    }

    /// Field access paths `var.f` (one level) yielding `ty`.
    fn field_paths(&self, ty: &Ty, scope: &[Var]) -> Vec<String> {
        let mut out = Vec::new();
        for v in scope {
            if let Ty::Rec(r) = v.ty {
                for (f, ft) in self.all_fields(r) {
                    if self.assignable(&ft, ty) {
                        out.push(format!("{}.{f}", v.name));
                    }
                }
            }
        }
        out
    }

    fn expr_inner(&mut self, ty: &Ty, scope: &[Var], depth: usize) {
        let leaf = depth > self.cfg.max_depth || self.rng.gen_bool(0.35);
        let vars = self.vars_of(ty, scope);
        if leaf || self.rng.gen_bool(0.2) {
            if !vars.is_empty() && self.rng.gen_bool(0.6) {
                let v = vars.choose(&mut self.rng).unwrap().clone();
                self.out.push_str(&v);
                return;
            }
            if leaf {
                return self.literal(ty, scope, depth);
            }
        }
        let fields = self.field_paths(ty, scope);
        if !fields.is_empty() && self.rng.gen_bool(0.15) {
            let f = fields.choose(&mut self.rng).unwrap().clone();
            self.out.push_str(&f);
            return;
        }
        let callees = self.funcs_returning(ty);
        if !callees.is_empty() && self.rng.gen_bool(0.15) {
            let f = *callees.choose(&mut self.rng).unwrap();
            return self.call(f, scope, depth);
        }
        match ty {
            Ty::Int => match self.rng.gen_range(0..10) {
                0..=4 => {
                    let op = *["+", "-", "*", "/", "%", "+", "-"]
                        .choose(&mut self.rng)
                        .unwrap();
                    self.binary(&Ty::Int, op, scope, depth);
                }
                5 => {
                    self.out.push('-');
                    self.atom(&Ty::Int, scope, depth + 1);
                }
                6 => {
                    self.out.push_str("len(");
                    self.expr(&Ty::Arr, scope, depth + 1);
                    self.out.push(')');
                }
                7 => {
                    self.atom(&Ty::Arr, scope, depth + 1);
                    self.out.push('[');
                    self.expr(&Ty::Int, scope, depth + 1);
                    self.out.push(']');
                }
                _ => self.literal(ty, scope, depth),
            },
            Ty::Bool => match self.rng.gen_range(0..10) {
                0..=3 => {
                    let op = *["<", "<=", ">", ">=", "==", "!="]
                        .choose(&mut self.rng)
                        .unwrap();
                    self.binary(&Ty::Int, op, scope, depth);
                }
                4 | 5 => {
                    let op = *["&&", "||"].choose(&mut self.rng).unwrap();
                    self.binary(&Ty::Bool, op, scope, depth);
                }
                6 => {
                    let op = *["==", "!="].choose(&mut self.rng).unwrap();
                    self.binary(&Ty::Bool, op, scope, depth);
                }
                7 => {
                    self.out.push('!');
                    self.atom(&Ty::Bool, scope, depth + 1);
                }
                _ => self.literal(ty, scope, depth),
            },
            _ => self.literal(ty, scope, depth),
        }
    }

    /// Operand that needs no parentheses after a unary operator or before
    /// a postfix one.
    fn atom(&mut self, ty: &Ty, scope: &[Var], depth: usize) {
        let vars = self.vars_of(ty, scope);
        if !vars.is_empty() && self.rng.gen_bool(0.5) {
            let v = vars.choose(&mut self.rng).unwrap().clone();
            self.out.push_str(&v);
        } else if matches!(ty, Ty::Arr) || self.rng.gen_bool(0.5) {
            self.literal_nonneg(ty, scope, depth);
        } else {
            self.out.push('(');
            self.expr_inner(ty, scope, depth);
            self.out.push(')');
        }
    }

    /// Binary expression with every operand parenthesised unless it is a
    /// plain variable or literal, so precedence never changes the meaning.
    fn binary(&mut self, operand: &Ty, op: &str, scope: &[Var], depth: usize) {
        self.operand(operand, scope, depth + 1);
        self.space();
        self.out.push_str(op);
        self.space();
        self.operand(operand, scope, depth + 1);
    }

    fn operand(&mut self, ty: &Ty, scope: &[Var], depth: usize) {
        if self.rng.gen_bool(0.5) {
            self.atom(ty, scope, depth);
        } else {
            self.out.push('(');
            self.expr_inner(ty, scope, depth);
            self.out.push(')');
        }
    }

    fn int_literal(&mut self) -> i64 {
        match self.rng.gen_range(0..40) {
            0 => i64::MAX,
            1 => i64::MAX - 1,
            2..=4 => self.rng.gen_range(-1000..1000),
            _ => self.rng.gen_range(-5..=10),
        }
    }

    fn literal(&mut self, ty: &Ty, scope: &[Var], depth: usize) {
        if let Ty::Int = ty {
            let n = self.int_literal();
            if n < 0 {
                self.out.push_str(&format!("-{}", n.unsigned_abs()));
            } else {
                self.out.push_str(&n.to_string());
            }
            return;
        }
        self.literal_nonneg(ty, scope, depth)
    }

    fn literal_nonneg(&mut self, ty: &Ty, scope: &[Var], depth: usize) {
        match ty {
            Ty::Int => {
                let n = self.int_literal();
                self.out
                    .push_str(&n.unsigned_abs().min(i64::MAX as u64).to_string());
            }
            Ty::Bool => {
                let b = self.rng.gen_bool(0.5);
                self.out.push_str(if b { "true" } else { "false" });
            }
            Ty::Arr => {
                let n = self.rng.gen_range(0..4);
                self.out.push('[');
                for k in 0..n {
                    if k > 0 {
                        self.out.push_str(", ");
                    }
                    let d = if depth > self.cfg.max_depth {
                        depth
                    } else {
                        self.cfg.max_depth
                    };
                    self.expr(&Ty::Int, scope, d + 1);
                }
                self.out.push(']');
            }
            Ty::Rec(r) => {
                // Subtypes may hold fields of their ancestors' field types, so
                // only the exact type is safe once literals get deep.
                let options = if depth > self.cfg.max_depth + 2 {
                    vec![*r]
                } else {
                    self.subtypes(*r)
                };
                let pick = *options.choose(&mut self.rng).unwrap();
                let name = self.records[pick].name.clone();
                let mut fields = self.all_fields(pick);
                if self.rng.gen_bool(0.3) {
                    fields.shuffle(&mut self.rng);
                }
                self.out.push_str(&name);
                self.out.push_str(" {");
                for (k, (f, ft)) in fields.iter().enumerate() {
                    if k > 0 {
                        self.out.push(',');
                    }
                    self.out.push(' ');
                    self.out.push_str(f);
                    self.out.push_str(": ");
                    self.expr(ft, scope, depth.max(self.cfg.max_depth + 1) + 1);
                }
                self.out.push_str(" }");
            }
        }
    }
}

/// Splits a generated program into project text without tests and one
/// canonical text per test. Project lines keep their numbers when a test
/// text is appended after the project text.
pub fn split_suite(source: &str) -> (String, Vec<(String, String)>) {
    let mut program = minilang::parse(source).expect("generated source parses");
    let tests = std::mem::take(&mut program.tests);
    let project = minilang::render(&program);
    let suite = tests
        .iter()
        .map(|t| (t.name.clone(), minilang::render::render_test(t)))
        .collect();
    (project, suite)
}
