//! Type and coercion algebra.

use std::collections::HashSet;
use std::rc::Rc;

use gradual::coercion::{self, Crcn, Label};
use gradual::frontend::ast::SType;
use gradual::pipeline;
use gradual::runtime::{CastRep, Halt, Machine, Res, RunConfig, Value};
use gradual::types::{RefMode, TypeId, TypeTable};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::support::{self, universe, BOOL, INT};
use crate::Verdict;

const TRIPLES: u64 = 10_000;

/// Seeds whose mismatch follows from the normal form itself rather than from
/// a bug; see the README. Seed 5385: tuple composition is pointwise, so the
/// second cast's first component fails before the first cast's second one.
/// Seed 6831: a composed monotonic reference cast keeps a single label for a
/// meet more precise than either type, so it cannot name the cast that fails.
const STRUCTURAL: [u64; 2] = [5385, 6831];

/// Surface text of a value of type exactly `t`. `Dyn` positions hold a value
/// of the matching part of `w` most of the time.
fn value(rng: &mut ChaCha8Rng, t: &SType, w: &SType) -> String {
    match t {
        SType::Dyn => {
            let inner = if !matches!(w, SType::Dyn) && rng.gen_bool(0.9) { w.clone() } else { support::static_type(rng, 2) };
            format!("(: {} Dyn)", value(rng, &inner, &inner))
        }
        SType::Base(b) if *b == gradual::types::BaseType::Int => rng.gen_range(-5..50).to_string(),
        SType::Base(b) if *b == gradual::types::BaseType::Bool => (if rng.gen_bool(0.5) { "#t" } else { "#f" }).into(),
        SType::Base(_) => "2.5".into(),
        SType::Fun(ps, r) => {
            let wr = match w {
                SType::Fun(qs, s) if qs.len() == ps.len() => (**s).clone(),
                _ => (**r).clone(),
            };
            let params: Vec<String> = ps.iter().enumerate().map(|(i, p)| format!("[x{i} : {p}]")).collect();
            let body = match ps.iter().position(|p| p == &**r) {
                Some(i) if rng.gen_bool(0.5) => format!("x{i}"),
                _ => value(rng, r, &wr),
            };
            format!("(lambda ({}) : {r} {body})", params.join(" "))
        }
        SType::Tuple(ts) => {
            let ws = match w {
                SType::Tuple(us) if us.len() == ts.len() => us.clone(),
                _ => ts.clone(),
            };
            let parts: Vec<String> = ts.iter().zip(&ws).map(|(t, w)| value(rng, t, w)).collect();
            format!("(tuple {})", parts.join(" "))
        }
        SType::Ref(x) | SType::Vect(x) => {
            let wx = match (t, w) {
                (SType::Ref(_), SType::Ref(y)) | (SType::Vect(_), SType::Vect(y)) => (**y).clone(),
                _ => (**x).clone(),
            };
            let e = value(rng, x, &wx);
            if matches!(t, SType::Ref(_)) { format!("(box {e})") } else { format!("(make-vector 1 {e})") }
        }
    }
}

fn fill(t: &SType) -> SType {
    plan(t, &INT)
}

/// `t` with every `Dyn` replaced by the matching part of the static `w`.
fn plan(t: &SType, w: &SType) -> SType {
    match (t, w) {
        (SType::Dyn, SType::Dyn) => INT,
        (SType::Dyn, _) => w.clone(),
        (SType::Fun(ps, r), SType::Fun(qs, s)) if ps.len() == qs.len() => {
            SType::Fun(ps.iter().zip(qs).map(|(p, q)| plan(p, q)).collect(), Box::new(plan(r, s)))
        }
        (SType::Tuple(ts), SType::Tuple(us)) if ts.len() == us.len() => {
            SType::Tuple(ts.iter().zip(us).map(|(t, u)| plan(t, u)).collect())
        }
        (SType::Ref(x), SType::Ref(y)) => SType::Ref(Box::new(plan(x, y))),
        (SType::Vect(x), SType::Vect(y)) => SType::Vect(Box::new(plan(x, y))),
        (SType::Base(_), _) => t.clone(),
        (SType::Fun(ps, r), _) => SType::Fun(ps.iter().map(fill).collect(), Box::new(fill(r))),
        (SType::Tuple(ts), _) => SType::Tuple(ts.iter().map(fill).collect()),
        (SType::Ref(x), _) => SType::Ref(Box::new(fill(x))),
        (SType::Vect(x), _) => SType::Vect(Box::new(fill(x))),
    }
}

/// Probe values consumed while observing at the static type `s`, in the
/// order [`Observer::observe`] takes them.
fn probes(rng: &mut ChaCha8Rng, s: &SType, out: &mut Vec<String>) {
    match s {
        SType::Dyn | SType::Base(_) => {}
        SType::Tuple(ts) => ts.iter().for_each(|t| probes(rng, t, out)),
        SType::Fun(ps, r) => {
            for p in ps {
                out.push(value(rng, p, p));
            }
            probes(rng, r, out);
        }
        SType::Ref(x) | SType::Vect(x) => {
            probes(rng, x, out);
            out.push(value(rng, x, x));
            probes(rng, x, out);
        }
    }
}

struct Observer<'m, 'p> {
    m: &'m mut Machine<'p>,
    refs: RefMode,
    probes: Vec<Value>,
    next: usize,
    out: String,
    label: Label,
}

impl Observer<'_, '_> {
    fn ty(&mut self, t: &SType) -> TypeId {
        t.intern(&mut self.m.types, self.refs)
    }

    fn probe(&mut self, s: &SType, t: &SType) -> Res<Value> {
        let v = self.probes[self.next].clone();
        self.next += 1;
        let (s, t) = (self.ty(s), self.ty(t));
        let c = coercion::make_coercion(&self.m.types, s, t, &Rc::from("probe"));
        self.m.apply_coercion(v, &c)
    }

    /// Prints `v`, seen at `t`, by using it at the static `s`: calling
    /// functions on probes and reading, writing and rereading cells.
    fn observe(&mut self, v: Value, t: &SType, s: &SType) -> Res<()> {
        match t {
            SType::Dyn => {
                let target = self.ty(s);
                let c = coercion::make_coercion(&self.m.types, TypeId::DYN, target, &self.label.clone());
                let v = self.m.apply_coercion(v, &c)?;
                self.m.settle()?;
                self.observe(v, s, s)
            }
            SType::Base(_) => {
                self.out.push_str(&self.m.render(&v));
                self.out.push(' ');
                Ok(())
            }
            SType::Tuple(ts) => {
                let (Value::Tuple(vs), SType::Tuple(ss)) = (&v, s) else { panic!("tuple observed at {t}") };
                for ((x, t), s) in vs.iter().zip(ts).zip(ss) {
                    self.observe(x.clone(), t, s)?;
                }
                Ok(())
            }
            SType::Fun(ps, r) => {
                let SType::Fun(qs, rs) = s else { panic!("function observed at {t}") };
                let mut args = Vec::new();
                for (p, q) in ps.iter().zip(qs) {
                    args.push(self.probe(q, p)?);
                }
                self.out.push_str("call ");
                let res = self.m.call(&v, args)?;
                self.m.settle()?;
                self.observe(res, r, rs)
            }
            SType::Ref(x) | SType::Vect(x) => {
                let (SType::Ref(sx) | SType::Vect(sx)) = s else { panic!("cell observed at {t}") };
                let index = matches!(t, SType::Vect(_)).then_some(0);
                let read = self.read(&v, x, index)?;
                self.observe(read, x, sx)?;
                let p = self.probe(sx, x)?;
                self.write(&v, x, index, p)?;
                self.out.push_str("write ");
                let read = self.read(&v, x, index)?;
                self.observe(read, x, sx)
            }
        }
    }

    fn read(&mut self, r: &Value, x: &SType, index: Option<i64>) -> Res<Value> {
        match (self.refs, index) {
            (RefMode::Proxied, None) => self.m.box_read(r),
            (RefMode::Proxied, Some(i)) => self.m.vect_read(r, i),
            (RefMode::Monotonic, i) => {
                let t = self.ty(x);
                let label = self.label.clone();
                self.m.mono_read_typed(r, i, t, &label)
            }
        }
    }

    fn write(&mut self, r: &Value, x: &SType, index: Option<i64>, v: Value) -> Res<()> {
        match (self.refs, index) {
            (RefMode::Proxied, None) => self.m.box_write(r, v),
            (RefMode::Proxied, Some(i)) => self.m.vect_write(r, i, v),
            (RefMode::Monotonic, i) => {
                let t = self.ty(x);
                let label = self.label.clone();
                self.m.mono_write_typed(r, i, v, t, &label)?;
                self.m.settle()
            }
        }
    }
}

struct Triple {
    refs: RefMode,
    tys: [SType; 3],
    /// Optional intermediate types, making each coercion a composite with two labels.
    mids: [Option<SType>; 2],
    want: SType,
    src: String,
}

fn triple(seed: u64) -> Triple {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let refs = if seed.is_multiple_of(2) { RefMode::Proxied } else { RefMode::Monotonic };
    let k = support::static_type(&mut rng, 3);
    let tys = [0, 1, 2].map(|_| support::perturb(&mut rng, &k, 3));
    let mids = [0, 1].map(|_| rng.gen_bool(0.3).then(|| support::perturb(&mut rng, &k, 3)));
    let v = value(&mut rng, &tys[0], &k);
    let want = plan(&tys[2], &k);
    let mut ps = Vec::new();
    probes(&mut rng, &want, &mut ps);
    let src = format!("(tuple {v} 0 {})", ps.join(" "));
    Triple { refs, tys, mids, want, src }
}

fn coercion_of(m: &mut Machine, refs: RefMode, a: &SType, mid: &Option<SType>, b: &SType, labels: [&str; 2]) -> Crcn {
    let (a, b) = (a.intern(&mut m.types, refs), b.intern(&mut m.types, refs));
    match mid {
        None => m.make(a, b, &Rc::from(labels[0])),
        Some(x) => {
            let x = x.intern(&mut m.types, refs);
            let c = m.make(a, x, &Rc::from(labels[0]));
            let d = m.make(x, b, &Rc::from(labels[1]));
            m.compose(&c, &d)
        }
    }
}

#[derive(Debug, PartialEq)]
enum Seen {
    Value(String),
    Blame(String),
    Inconsistent,
    Fault(String),
}

fn run_side(t: &Triple, program: &gradual::frontend::ir::Program, composed: bool) -> Seen {
    let mut m = Machine::new(program.types.clone(), &program.pool, program.global_names.len(), &RunConfig::default());
    let Ok(Value::Tuple(vs)) = m.run_items(program) else { panic!("value program failed: {}", t.src) };
    let v = vs[0].clone();
    let c1 = coercion_of(&mut m, t.refs, &t.tys[0], &t.mids[0], &t.tys[1], ["p1", "p2"]);
    let c2 = coercion_of(&mut m, t.refs, &t.tys[1], &t.mids[1], &t.tys[2], ["q1", "q2"]);
    let res = (|| {
        let w = if composed {
            let c = m.compose(&c1, &c2);
            let w = m.apply_coercion(v, &c)?;
            m.settle()?;
            w
        } else {
            let w = m.apply_coercion(v, &c1)?;
            let w = m.apply_coercion(w, &c2)?;
            m.settle()?;
            w
        };
        let mut obs =
            Observer { m: &mut m, refs: t.refs, probes: vs[2..].to_vec(), next: 0, out: String::new(), label: Rc::from("observe") };
        obs.observe(w, &t.tys[2], &t.want)?;
        Ok(obs.out)
    })();
    match res {
        Ok(s) => Seen::Value(s),
        Err(Halt::Blame(l)) => Seen::Blame(l.to_string()),
        Err(Halt::Error(_)) => Seen::Inconsistent,
        Err(Halt::Fault(f)) => Seen::Fault(f),
    }
}

/// Applying `c1 ; c2` agrees with applying `c1` then `c2`, blame labels included.
pub fn compose_oracle() -> Verdict {
    let (mut values, mut blames, mut errors) = (0, 0, 0);
    let mut label_mismatch = Vec::new();
    let mut other_mismatch = Vec::new();
    let mut failing = Vec::new();
    for seed in 0..TRIPLES {
        let t = triple(seed);
        let mode = support::mode(CastRep::Coercions, t.refs);
        let program = match pipeline::compile(&t.src, "v.grift", &mode) {
            Ok(p) => p,
            Err(e) => return Verdict::fail(format!("generated value does not compile: {e}\n{}", t.src)),
        };
        let a = run_side(&t, &program, true);
        let b = run_side(&t, &program, false);
        if a != b || matches!(a, Seen::Fault(_)) {
            failing.push(seed);
        }
        match (&a, &b) {
            _ if a == b => match a {
                Seen::Value(_) => values += 1,
                Seen::Blame(_) => blames += 1,
                Seen::Inconsistent => errors += 1,
                Seen::Fault(f) => other_mismatch.push(format!("seed {seed}: fault {f}")),
            },
            (Seen::Blame(x), Seen::Blame(y)) => label_mismatch.push(format!(
                "seed {seed}: composed blames {x}, sequential blames {y}; {:?} references, {} => {} => {}",
                t.refs, t.tys[0], t.tys[1], t.tys[2]
            )),
            _ => other_mismatch.push(format!(
                "seed {seed}: composed {a:?}, sequential {b:?}; {:?} references, {} => {} => {}",
                t.refs, t.tys[0], t.tys[1], t.tys[2]
            )),
        }
    }
    let detail = format!(
        "{TRIPLES} triples ({values} values, {blames} blame, {errors} inconsistent), {} label mismatches, {} other mismatches",
        label_mismatch.len(),
        other_mismatch.len()
    );
    let examples: Vec<String> = other_mismatch.iter().chain(&label_mismatch).take(5).cloned().collect();
    Verdict::check(failing.is_empty(), detail)
        .with_notes(examples)
        .known_if(failing.iter().all(|s| STRUCTURAL.contains(s)))
}

fn interned(types: &mut TypeTable, u: &[SType], refs: RefMode) -> Vec<TypeId> {
    u.iter().map(|t| t.intern(types, refs)).collect()
}

/// Composition stays in normal form, and repeated composition stops growing.
pub fn normal_form_closure() -> Verdict {
    let u = universe(3);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let labels: Vec<Label> = ["a", "b", "c", "d"].iter().map(|s| Rc::from(*s)).collect();
    let mut notes = Vec::new();
    let mut ok = true;
    let (mut max10, mut max1000) = (0, 0);
    let mut compositions = 0u64;
    for refs in [RefMode::Proxied, RefMode::Monotonic] {
        let mut types = TypeTable::new();
        let ids = interned(&mut types, &u, refs);
        // Arbitrary pairs, consistent or not.
        for _ in 0..20_000 {
            let [a, b, c] = [0, 1, 2].map(|_| *ids.choose(&mut rng).unwrap());
            let c1 = coercion::make_coercion(&types, a, b, &labels[0]);
            let c2 = coercion::make_coercion(&types, b, c, &labels[1]);
            let k = coercion::compose(&mut types, &c1, &c2);
            compositions += 1;
            if !coercion::is_normal(&k) {
                ok = false;
                notes.push(format!("not normal: {}", k.display(&types)));
            }
        }
        // Random walks through consistent neighbours.
        let neighbours: Vec<Vec<usize>> =
            (0..ids.len()).map(|i| (0..ids.len()).filter(|&j| types.consistent(ids[i], ids[j])).collect()).collect();
        for _ in 0..100 {
            let mut at = rng.gen_range(0..ids.len());
            let mut c = coercion::identity();
            for k in 1..=1000 {
                let next = *neighbours[at].choose(&mut rng).unwrap();
                let step = coercion::make_coercion(&types, ids[at], ids[next], &labels[k % labels.len()]);
                c = coercion::compose(&mut types, &c, &step);
                compositions += 1;
                if !coercion::is_normal(&c) {
                    ok = false;
                    notes.push(format!("not normal after {k} steps: {}", c.display(&types)));
                }
                let size = c.size();
                if k <= 10 {
                    max10 = max10.max(size);
                }
                max1000 = max1000.max(size);
                at = next;
            }
        }
    }
    notes.truncate(3);
    let plateau = max10 == max1000;
    Verdict::check(
        ok && plateau,
        format!("{compositions} compositions all normal: {ok}; max size by k=10 is {max10}, by k=1000 is {max1000}"),
    )
    .with_notes(notes)
}

fn consistent_o(a: &SType, b: &SType) -> bool {
    match (a, b) {
        (SType::Dyn, _) | (_, SType::Dyn) => true,
        (SType::Base(x), SType::Base(y)) => x == y,
        (SType::Fun(ps, r), SType::Fun(qs, s)) => {
            ps.len() == qs.len() && ps.iter().zip(qs).all(|(p, q)| consistent_o(p, q)) && consistent_o(r, s)
        }
        (SType::Tuple(xs), SType::Tuple(ys)) => xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| consistent_o(x, y)),
        (SType::Ref(x), SType::Ref(y)) | (SType::Vect(x), SType::Vect(y)) => consistent_o(x, y),
        _ => false,
    }
}

fn meet_o(a: &SType, b: &SType) -> Option<SType> {
    match (a, b) {
        (SType::Dyn, t) | (t, SType::Dyn) => Some(t.clone()),
        (SType::Base(x), SType::Base(y)) => (x == y).then(|| a.clone()),
        (SType::Fun(ps, r), SType::Fun(qs, s)) if ps.len() == qs.len() => Some(SType::Fun(
            ps.iter().zip(qs).map(|(p, q)| meet_o(p, q)).collect::<Option<_>>()?,
            Box::new(meet_o(r, s)?),
        )),
        (SType::Tuple(xs), SType::Tuple(ys)) if xs.len() == ys.len() => {
            Some(SType::Tuple(xs.iter().zip(ys).map(|(x, y)| meet_o(x, y)).collect::<Option<_>>()?))
        }
        (SType::Ref(x), SType::Ref(y)) => Some(SType::Ref(Box::new(meet_o(x, y)?))),
        (SType::Vect(x), SType::Vect(y)) => Some(SType::Vect(Box::new(meet_o(x, y)?))),
        _ => None,
    }
}

/// Exhaustive pairwise checks on every type of depth at most 3.
pub fn type_algebra() -> Verdict {
    let u = universe(3);
    let mut types = TypeTable::new();
    let ids = interned(&mut types, &u, RefMode::Proxied);
    let mut bad: Vec<String> = Vec::new();
    let mut complain = |msg: String| {
        if bad.len() < 3 {
            bad.push(msg);
        }
    };

    let distinct: HashSet<TypeId> = ids.iter().copied().collect();
    let structs: HashSet<String> = u.iter().map(|t| t.to_string()).collect();
    let again = interned(&mut types, &u, RefMode::Proxied);
    let mut fresh = TypeTable::new();
    let mut reversed: Vec<TypeId> = u.iter().rev().map(|t| t.intern(&mut fresh, RefMode::Proxied)).collect();
    reversed.reverse();
    let interning = distinct.len() == structs.len()
        && again == ids
        && u.iter().zip(&ids).all(|(t, id)| SType::from_type(&types, *id) == *t)
        && u.iter().zip(&reversed).all(|(t, id)| SType::from_type(&fresh, *id) == *t);
    if !interning {
        complain("interning does not match structural equality".into());
    }

    let mut pairs = 0u64;
    let mut consistent_pairs = 0u64;
    for (i, a) in u.iter().enumerate() {
        let ia = ids[i];
        if types.meet(ia, ia) != Ok(ia) {
            complain(format!("meet not idempotent on {a}"));
        }
        for (j, b) in u.iter().enumerate() {
            let ib = ids[j];
            pairs += 1;
            let c = types.consistent(ia, ib);
            if c != consistent_o(a, b) {
                complain(format!("consistency of {a} and {b}"));
            }
            consistent_pairs += c as u64;
            let m = types.meet(ia, ib);
            if m.is_ok() != c {
                complain(format!("meet of {a} and {b} defined: {}, consistent: {c}", m.is_ok()));
            }
            if m != types.meet(ib, ia) {
                complain(format!("meet of {a} and {b} not commutative"));
            }
            let expect = meet_o(a, b).map(|t| t.intern(&mut types, RefMode::Proxied));
            if m.ok() != expect {
                complain(format!("meet of {a} and {b} differs from the structural meet"));
            }
            if types.precision_leq(ia, ib) != gradual::testgen::below(a, b) {
                complain(format!("precision of {a} and {b}"));
            }
        }
    }

    let (int, dyn_, bool_) = (INT.intern(&mut types, RefMode::Proxied), TypeId::DYN, BOOL.intern(&mut types, RefMode::Proxied));
    let witness = types.consistent(int, dyn_) && types.consistent(dyn_, bool_) && !types.consistent(int, bool_);
    if !witness {
        complain("Int ~ Dyn ~ Bool witness fails".into());
    }
    Verdict::check(
        bad.is_empty(),
        format!("{} types, {pairs} ordered pairs ({consistent_pairs} consistent), non-transitivity witness holds: {witness}", u.len()),
    )
    .with_notes(bad)
}
