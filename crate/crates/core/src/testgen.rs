//! Random well-typed programs for differential testing.
//!
//! Every expression is generated against two types: the static type it must
//! have, and a fully static "intended" type that the static type is less
//! precise than. Since any two types below the same static type are
//! consistent, ascriptions between them always typecheck, and the casts they
//! introduce succeed at run time. Blame comes only from occasionally letting
//! a `Dyn` position carry a value of some unrelated type.
//!
//! Programs never divide, index vectors only at 0 (sizes start at 1), and
//! loop only a few times, so the only ways to stop early are blame and
//! monotonic inconsistency.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::frontend::ast::SType;
use crate::types::BaseType;

#[derive(Clone, Copy, Debug)]
pub struct GenConfig {
    /// Expression nesting budget.
    pub depth: u32,
    /// Type nesting bound, counted in constructors.
    pub type_depth: u32,
    /// Chance that a `Dyn` position holds a value of an unrelated type.
    pub wrong_type: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig { depth: 5, type_depth: 2, wrong_type: 0.04 }
    }
}

struct Var {
    name: String,
    ty: SType,
    want: SType,
}

struct Gen {
    rng: ChaCha8Rng,
    cfg: GenConfig,
    env: Vec<Var>,
    fresh: u32,
}

const INT: SType = SType::Base(BaseType::Int);
const BOOL: SType = SType::Base(BaseType::Bool);
const FLOAT: SType = SType::Base(BaseType::Float);

impl Gen {
    fn chance(&mut self, p: f64) -> bool {
        self.rng.gen_bool(p)
    }

    fn name(&mut self, base: &str) -> String {
        self.fresh += 1;
        format!("{base}{}", self.fresh)
    }

    fn static_type(&mut self, depth: u32) -> SType {
        let leaf = depth == 0 || self.chance(0.45);
        if leaf {
            return match self.rng.gen_range(0..5) {
                0 | 1 => INT,
                2 | 3 => BOOL,
                _ => FLOAT,
            };
        }
        let d = depth - 1;
        match self.rng.gen_range(0..4) {
            0 => {
                let n = self.rng.gen_range(1..=2);
                SType::Fun((0..n).map(|_| self.static_type(d)).collect(), Box::new(self.static_type(d)))
            }
            1 => SType::Tuple(vec![self.static_type(d), self.static_type(d)]),
            2 => SType::Ref(Box::new(self.static_type(d))),
            _ => SType::Vect(Box::new(self.static_type(d))),
        }
    }

    /// A type at most as precise as `t`.
    fn loosen(&mut self, t: &SType) -> SType {
        if self.chance(0.25) {
            return SType::Dyn;
        }
        if self.chance(0.4) {
            return t.clone();
        }
        match t {
            SType::Dyn | SType::Base(_) => t.clone(),
            SType::Fun(ps, r) => SType::Fun(ps.iter().map(|p| self.loosen(p)).collect(), Box::new(self.loosen(r))),
            SType::Tuple(ts) => SType::Tuple(ts.iter().map(|x| self.loosen(x)).collect()),
            SType::Ref(x) => SType::Ref(Box::new(self.loosen(x))),
            SType::Vect(x) => SType::Vect(Box::new(self.loosen(x))),
        }
    }

    fn ascribe(&self, e: String, from: &SType, to: &SType) -> String {
        if from == to {
            e
        } else {
            format!("(: {e} {to})")
        }
    }

    /// An expression of static type exactly `ty` whose value, barring
    /// injected wrong types, has type `want`.
    fn expr(&mut self, ty: &SType, want: &SType, depth: u32) -> String {
        if *ty == SType::Dyn {
            return self.dyn_expr(want, depth);
        }
        if depth == 0 {
            return self.var_or_intro(ty, want, 0);
        }
        let d = depth - 1;
        match self.rng.gen_range(0..12) {
            0 | 1 => self.var_or_intro(ty, want, depth),
            2 => {
                let from = self.loosen(want);
                let e = self.expr(&from, want, d);
                self.ascribe(e, &from, ty)
            }
            3 => self.app(ty, want, d),
            4 => {
                let c = self.expr(&BOOL, &BOOL, d);
                let a = self.expr(ty, want, d);
                let b = self.expr(ty, want, d);
                format!("(if {c} {a} {b})")
            }
            5 | 6 => self.let_in(ty, want, d),
            7 => {
                let r = SType::Ref(Box::new(want.clone()));
                let rt = self.loosen(&r);
                let re = self.expr(&rt, &r, d);
                self.eliminated(format!("(unbox {re})"), elem_of(&rt), ty)
            }
            8 => {
                let v = SType::Vect(Box::new(want.clone()));
                let vt = self.loosen(&v);
                let ve = self.expr(&vt, &v, d);
                self.eliminated(format!("(vector-ref {ve} 0)"), elem_of(&vt), ty)
            }
            9 => {
                let other = self.static_type(1);
                let i = self.rng.gen_range(0..2);
                let parts = if i == 0 { vec![want.clone(), other] } else { vec![other, want.clone()] };
                let t = SType::Tuple(parts);
                let tt = self.loosen(&t);
                let te = self.expr(&tt, &t, d);
                let got = match &tt {
                    SType::Tuple(ts) => ts[i].clone(),
                    _ => SType::Dyn,
                };
                self.eliminated(format!("(tuple-proj {te} {i})"), got, ty)
            }
            10 => self.effect_then(ty, want, d),
            _ => self.operator(ty, want, d),
        }
    }

    /// Wraps an elimination form whose static result is `got` so it has type `ty`.
    fn eliminated(&self, e: String, got: SType, ty: &SType) -> String {
        self.ascribe(e, &got, ty)
    }

    fn dyn_expr(&mut self, want: &SType, depth: u32) -> String {
        let want = if self.chance(self.cfg.wrong_type) { self.static_type(self.cfg.type_depth) } else { want.clone() };
        if depth > 0 && self.chance(0.3) {
            if let Some(v) = self.pick_var(&SType::Dyn, &want) {
                return v;
            }
        }
        let from = match self.loosen(&want) {
            SType::Dyn => want.clone(),
            t => t,
        };
        let e = self.expr(&from, &want, depth.saturating_sub(1));
        format!("(: {e} Dyn)")
    }

    fn pick_var(&mut self, ty: &SType, want: &SType) -> Option<String> {
        let hits: Vec<usize> = (0..self.env.len()).filter(|&i| self.env[i].ty == *ty && self.env[i].want == *want).collect();
        if hits.is_empty() {
            return None;
        }
        let i = hits[self.rng.gen_range(0..hits.len())];
        Some(self.env[i].name.clone())
    }

    fn var_or_intro(&mut self, ty: &SType, want: &SType, depth: u32) -> String {
        if self.chance(0.6) {
            if let Some(v) = self.pick_var(ty, want) {
                return v;
            }
            // A variable holding the right kind of value at another static type.
            let hits: Vec<usize> = (0..self.env.len()).filter(|&i| self.env[i].want == *want).collect();
            if !hits.is_empty() {
                let v = &self.env[hits[self.rng.gen_range(0..hits.len())]];
                return self.ascribe(v.name.clone(), &v.ty.clone(), ty);
            }
        }
        self.intro(ty, want, depth)
    }

    fn intro(&mut self, ty: &SType, want: &SType, depth: u32) -> String {
        let d = depth.saturating_sub(1);
        match (ty, want) {
            (SType::Dyn, _) => self.dyn_expr(want, depth),
            (SType::Base(BaseType::Int), _) => self.rng.gen_range(-9..50).to_string(),
            (SType::Base(BaseType::Bool), _) => if self.chance(0.5) { "#t" } else { "#f" }.to_string(),
            (SType::Base(BaseType::Float), _) => format!("{:.1}", self.rng.gen_range(-20..40) as f64 / 4.0),
            (SType::Base(BaseType::Unit), _) => "()".to_string(),
            (SType::Fun(ps, r), SType::Fun(pw, rw)) => {
                let names: Vec<String> = ps.iter().map(|_| self.name("x")).collect();
                let mut params = Vec::new();
                for ((n, p), w) in names.iter().zip(ps).zip(pw) {
                    if *p == SType::Dyn && self.chance(0.5) {
                        params.push(n.clone());
                    } else {
                        params.push(format!("[{n} : {p}]"));
                    }
                    self.env.push(Var { name: n.clone(), ty: p.clone(), want: w.clone() });
                }
                let body = self.expr(r, rw, d);
                self.env.truncate(self.env.len() - names.len());
                format!("(lambda ({}) : {r} {body})", params.join(" "))
            }
            (SType::Tuple(ts), SType::Tuple(ws)) => {
                let es: Vec<String> = ts.iter().zip(ws).map(|(t, w)| self.expr(t, w, d)).collect();
                format!("(tuple {})", es.join(" "))
            }
            (SType::Ref(t), SType::Ref(w)) => {
                let e = self.expr(t, w, d);
                format!("(box {e})")
            }
            (SType::Vect(t), SType::Vect(w)) => {
                let e = self.expr(t, w, d);
                format!("(make-vector {} {e})", self.rng.gen_range(1..4))
            }
            _ => unreachable!("{ty} is not below {want}"),
        }
    }

    fn app(&mut self, ty: &SType, want: &SType, d: u32) -> String {
        let n = self.rng.gen_range(1..=2);
        let pw: Vec<SType> = (0..n).map(|_| self.static_type(1)).collect();
        let fw = SType::Fun(pw.clone(), Box::new(want.clone()));
        let ft = self.loosen(&fw);
        let f = self.expr(&ft, &fw, d);
        let (ps, got) = match &ft {
            SType::Fun(ps, r) => (ps.clone(), (**r).clone()),
            _ => (vec![SType::Dyn; n], SType::Dyn),
        };
        let args: Vec<String> = ps
            .iter()
            .zip(&pw)
            .map(|(p, w)| {
                let at = if self.chance(0.5) { p.clone() } else { self.loosen(w) };
                self.expr(&at, w, d)
            })
            .collect();
        self.ascribe(format!("({f} {})", args.join(" ")), &got, ty)
    }

    fn let_in(&mut self, ty: &SType, want: &SType, d: u32) -> String {
        let w = if self.chance(0.5) { self.static_type(self.cfg.type_depth) } else { want.clone() };
        let t = self.loosen(&w);
        let e = self.expr(&t, &w, d);
        let x = self.name("v");
        let binding = if t == SType::Dyn && self.chance(0.5) { format!("[{x} {e}]") } else { format!("[{x} : {t} {e}]") };
        self.env.push(Var { name: x, ty: t, want: w });
        let body = self.expr(ty, want, d);
        self.env.pop();
        format!("(let ({binding}) {body})")
    }

    /// A write through some reference or vector in scope, or a short loop,
    /// followed by an expression of the requested type.
    fn effect_then(&mut self, ty: &SType, want: &SType, d: u32) -> String {
        let cells: Vec<usize> =
            (0..self.env.len()).filter(|&i| matches!(self.env[i].want, SType::Ref(_) | SType::Vect(_))).collect();
        let effect = if cells.is_empty() || self.chance(0.2) {
            let acc = self.name("n");
            let i = self.name("i");
            format!("(let ([{acc} (box 0)]) (repeat ({i} 0 {}) (set-box! {acc} (+ (unbox {acc}) {i}))))", self.rng.gen_range(0..4))
        } else {
            let c = cells[self.rng.gen_range(0..cells.len())];
            let (name, cty, cwant) = (self.env[c].name.clone(), self.env[c].ty.clone(), self.env[c].want.clone());
            let elem = elem_of(&cty);
            let ew = elem_of(&cwant);
            let v = self.expr(&elem, &ew, d);
            match cwant {
                SType::Ref(_) => format!("(set-box! {name} {v})"),
                _ => format!("(vector-set! {name} 0 {v})"),
            }
        };
        let rest = self.expr(ty, want, d);
        format!("(begin {effect} {rest})")
    }

    fn operator(&mut self, ty: &SType, want: &SType, d: u32) -> String {
        let (e, got) = match want {
            SType::Base(BaseType::Int) if self.chance(0.2) => {
                let vw = SType::Vect(Box::new(self.static_type(1)));
                let vt = self.loosen(&vw);
                (format!("(vector-length {})", self.expr(&vt, &vw, d)), INT)
            }
            SType::Base(BaseType::Int) => {
                let op = ["+", "-", "*"][self.rng.gen_range(0..3)];
                let (a, b) = (self.operand(&INT, d), self.operand(&INT, d));
                (format!("({op} {a} {b})"), INT)
            }
            SType::Base(BaseType::Float) => {
                let op = ["+.", "-.", "*."][self.rng.gen_range(0..3)];
                let (a, b) = (self.operand(&FLOAT, d), self.operand(&FLOAT, d));
                (format!("({op} {a} {b})"), FLOAT)
            }
            SType::Base(BaseType::Bool) => match self.rng.gen_range(0..4) {
                0 => (format!("(not {})", self.operand(&BOOL, d)), BOOL),
                1 => {
                    let (a, b) = (self.expr(&SType::Dyn, &INT, d), self.expr(&SType::Dyn, &INT, d));
                    (format!("(= {a} {b})"), BOOL)
                }
                _ => {
                    let op = ["<", ">", "<=", ">=", "="][self.rng.gen_range(0..5)];
                    let (a, b) = (self.operand(&INT, d), self.operand(&INT, d));
                    (format!("({op} {a} {b})"), BOOL)
                }
            },
            _ => return self.intro(ty, want, d + 1),
        };
        self.ascribe(e, &got, ty)
    }

    fn operand(&mut self, want: &SType, d: u32) -> String {
        let t = if self.chance(0.3) { SType::Dyn } else { want.clone() };
        self.expr(&t, want, d)
    }

    fn program(&mut self) -> String {
        let mut defs = Vec::new();
        for _ in 0..self.rng.gen_range(0..3) {
            let w = self.static_type(self.cfg.type_depth);
            let t = self.loosen(&w);
            let e = self.expr(&t, &w, self.cfg.depth - 1);
            let name = self.name("g");
            defs.push(format!("(define {name} : {t} {e})"));
            self.env.push(Var { name, ty: t, want: w });
        }
        let w = match self.rng.gen_range(0..4) {
            0 => INT,
            1 => BOOL,
            2 => SType::Tuple(vec![INT, self.static_type(1)]),
            _ => self.static_type(self.cfg.type_depth),
        };
        let t = self.loosen(&w);
        let body = self.expr(&t, &w, self.cfg.depth);
        defs.push(body);
        defs.join("\n")
    }
}

fn elem_of(t: &SType) -> SType {
    match t {
        SType::Ref(e) | SType::Vect(e) => (**e).clone(),
        _ => SType::Dyn,
    }
}

/// Precision on surface types: `a` is at most as precise as `b`.
pub fn below(a: &SType, b: &SType) -> bool {
    match (a, b) {
        (SType::Dyn, _) => true,
        (SType::Base(x), SType::Base(y)) => x == y,
        (SType::Fun(ps, r), SType::Fun(qs, s)) => {
            ps.len() == qs.len() && ps.iter().zip(qs).all(|(p, q)| below(p, q)) && below(r, s)
        }
        (SType::Tuple(xs), SType::Tuple(ys)) => xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| below(x, y)),
        (SType::Ref(x), SType::Ref(y)) | (SType::Vect(x), SType::Vect(y)) => below(x, y),
        _ => false,
    }
}

/// The program for `seed` under `cfg`.
pub fn program_with(seed: u64, cfg: GenConfig) -> String {
    let mut g = Gen { rng: ChaCha8Rng::seed_from_u64(seed), cfg, env: Vec::new(), fresh: 0 };
    g.program()
}

pub fn program(seed: u64) -> String {
    program_with(seed, GenConfig::default())
}
