/// Latency buckets of a set-abstraction pass.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Bucket {
    /// Farthest point sampling.
    Subsampling,
    /// Neighbor search plus the gather of neighbor features and offsets.
    Grouping,
    /// MLPs, pooling and residual arithmetic.
    Computation,
}

impl Bucket {
    pub const ALL: [Bucket; 3] = [Bucket::Subsampling, Bucket::Grouping, Bucket::Computation];

    pub fn name(self) -> &'static str {
        match self {
            Bucket::Subsampling => "subsampling",
            Bucket::Grouping => "grouping",
            Bucket::Computation => "computation",
        }
    }
}

/// Instrumentation hook called around every bucketed section of a forward pass.
///
/// The core crate has no clock; timing probes are implemented by callers.
pub trait Probe {
    fn begin(&mut self, bucket: Bucket);
    fn end(&mut self, bucket: Bucket);
}

/// Probe that records nothing.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoProbe;

impl Probe for NoProbe {
    #[inline]
    fn begin(&mut self, _: Bucket) {}
    #[inline]
    fn end(&mut self, _: Bucket) {}
}

/// Runs `f` inside `bucket`.
#[inline]
pub fn timed<R>(probe: &mut dyn Probe, bucket: Bucket, f: impl FnOnce() -> R) -> R {
    probe.begin(bucket);
    let r = f();
    probe.end(bucket);
    r
}
