//! Dataset curation toolkit: a concept taxonomy with linking of external
//! concepts, difference-hash deduplication, and a simulated active
//! annotation loop that filters out-of-distribution samples before
//! spending annotation budget.

pub mod active;
pub mod cli;
pub mod dedup;
pub mod learner;
pub mod pool;
pub mod rng;
pub mod taxonomy;

