//! Monotonic heap traces.

use std::collections::HashMap;

use gradual::pipeline::{self, Mode};
use gradual::runtime::{Addr, CastRep};
use gradual::types::{RefMode, Type, TypeId, TypeTable};

use crate::support::{everything, mode};
use crate::Verdict;

/// Two cells that point at each other through `Dyn`, then get viewed at
/// increasingly precise reference types from both ends.
const CYCLE: &str = "(let ([a : (Ref Dyn) (box (: 0 Dyn))])
  (let ([b : (Ref Dyn) (box (: a Dyn))])
    (begin
      (set-box! a (: b Dyn))
      (let ([a1 : (Ref (Ref (Ref Dyn))) (: a Dyn)])
        (let ([b1 : (Ref (Ref (Ref Dyn))) (: b Dyn)])
          (tuple (: (unbox (unbox a1)) Dyn) (: (unbox b1) Dyn)))))))";

fn monotonic_modes() -> Vec<Mode> {
    let co = mode(CastRep::Coercions, RefMode::Monotonic);
    vec![co, Mode { lazy_coercions: true, ..co }, mode(CastRep::TypeBased, RefMode::Monotonic)]
}

/// Checks that each rtti in the trace is the meet of itself and the previous
/// one at that address. Returns the final rtti per address.
fn weakly_increasing(types: &mut TypeTable, trace: &[(Addr, TypeId)]) -> Result<HashMap<Addr, TypeId>, String> {
    let mut last: HashMap<Addr, TypeId> = HashMap::new();
    for &(a, t) in trace {
        if let Some(&old) = last.get(&a) {
            if types.meet(old, t) != Ok(t) {
                return Err(format!("cell {a} went from {} to {}", types.display(old), types.display(t)));
            }
        }
        last.insert(a, t);
    }
    Ok(last)
}

pub fn monotonic_rtti() -> Verdict {
    let mut problems = Vec::new();
    let (mut runs, mut updates) = (0, 0);
    for job in everything() {
        for m in monotonic_modes() {
            runs += 1;
            match pipeline::run_traced(job.src, "t.grift", &m, &job.input) {
                Ok(mut t) => {
                    updates += t.trace.len();
                    if let Err(e) = weakly_increasing(&mut t.types, &t.trace) {
                        problems.push(format!("{} under {m}: {e}", job.name));
                    }
                    if !t.heap_sound {
                        problems.push(format!("{} under {m}: a settled cell holds a value outside its rtti", job.name));
                    }
                }
                Err(e) => problems.push(format!("{} under {m}: {e}", job.name)),
            }
        }
    }

    let mut cycle = Vec::new();
    for m in monotonic_modes() {
        let mut t = match pipeline::run_traced(CYCLE, "cycle.grift", &m, &[]) {
            Ok(t) => t,
            Err(e) => {
                problems.push(format!("cycle under {m}: {e}"));
                continue;
            }
        };
        let finals = match weakly_increasing(&mut t.types, &t.trace) {
            Ok(f) => f,
            Err(e) => {
                problems.push(format!("cycle under {m}: {e}"));
                continue;
            }
        };
        // Each cell was viewed at (Ref (Ref Dyn)) elements directly, and at
        // (Ref Dyn) through the other cell.
        let types = &mut t.types;
        let ref_dyn = types.intern(Type::RefM(TypeId::DYN));
        let ref_ref_dyn = types.intern(Type::RefM(ref_dyn));
        let want = types.meet(ref_ref_dyn, ref_dyn).expect("consistent views");
        let mut addrs: Vec<Addr> = finals.keys().copied().collect();
        addrs.sort();
        let got: Vec<TypeId> = addrs.iter().take(2).map(|a| finals[a]).collect();
        if got != [want, want] {
            let shown: Vec<String> = got.iter().map(|t| types.display(*t).to_string()).collect();
            problems.push(format!("cycle under {m}: final rttis {shown:?}, want {}", types.display(want)));
        }
        cycle.push(format!("{} evolve steps", t.run.counters.heap_evolve_steps));
    }
    let count = problems.len();
    problems.truncate(3);
    Verdict::check(
        count == 0,
        format!("{runs} traced runs with {updates} rtti records, {count} problems; cyclic pair settles ({})", cycle.join(", ")),
    )
    .with_notes(problems)
}
