use serde::{Deserialize, Serialize};

/// Operation tallies for one run. All fields only grow during a run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub casts_executed: u64,
    pub coercions_composed: u64,
    pub coercions_created_at_runtime: u64,
    pub proxies_allocated: u64,
    pub max_ref_proxy_depth: u64,
    pub max_fun_proxy_depth: u64,
    pub ref_reads: u64,
    pub ref_writes: u64,
    pub rtti_updates: u64,
    pub heap_evolve_steps: u64,
}

impl Counters {
    pub fn note_ref_proxy(&mut self, depth: u32) {
        self.proxies_allocated += 1;
        self.max_ref_proxy_depth = self.max_ref_proxy_depth.max(depth as u64);
    }

    pub fn note_fun_proxy(&mut self, depth: u32) {
        self.proxies_allocated += 1;
        self.max_fun_proxy_depth = self.max_fun_proxy_depth.max(depth as u64);
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("counters serialize")
    }
}
