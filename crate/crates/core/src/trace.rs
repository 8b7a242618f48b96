//! Step-trace hooks streamed by the long-running stages.

/// Observer for per-step diagnostics. All methods default to no-ops.
pub trait Tracer {
    /// One reallocation step: iteration counter, excess-set residual, field
    /// mass, and the most negative entry of (target - marginal).
    fn realloc(&mut self, k: usize, residual: f64, mass: f64, min_deficit: f64) {
        let _ = (k, residual, mass, min_deficit);
    }

    /// One smoothing evaluation.
    fn smoothing(&mut self, epsilon: f64, marginal_error: f64, h1_distance: f64) {
        let _ = (epsilon, marginal_error, h1_distance);
    }

    /// One row of the sign pipeline.
    fn sign(&mut self, n: usize, lip: f64, a_n: f64, l2_err: f64, h1_err: f64) {
        let _ = (n, lip, a_n, l2_err, h1_err);
    }
}

/// Discards all events.
pub struct NullTracer;

impl Tracer for NullTracer {}

/// Writes tab-separated lines, one per event.
pub struct TsvTracer<W: std::io::Write> {
    out: W,
}

impl<W: std::io::Write> TsvTracer<W> {
    pub fn new(out: W) -> Self {
        TsvTracer { out }
    }
}

impl<W: std::io::Write> Tracer for TsvTracer<W> {
    fn realloc(&mut self, k: usize, residual: f64, mass: f64, min_deficit: f64) {
        let _ = writeln!(
            self.out,
            "realloc\t{k}\t{residual:.17e}\t{mass:.17e}\t{min_deficit:.17e}"
        );
    }

    fn smoothing(&mut self, epsilon: f64, marginal_error: f64, h1_distance: f64) {
        let _ = writeln!(
            self.out,
            "smooth\t{epsilon:.17e}\t{marginal_error:.17e}\t{h1_distance:.17e}"
        );
    }

    fn sign(&mut self, n: usize, lip: f64, a_n: f64, l2_err: f64, h1_err: f64) {
        let _ = writeln!(
            self.out,
            "sign\t{n}\t{lip:.17e}\t{a_n:.17e}\t{l2_err:.17e}\t{h1_err:.17e}"
        );
    }
}

/// Records realloc events for post-hoc inequality checks in tests.
#[derive(Default)]
pub struct RecordingTracer {
    pub realloc_steps: Vec<(usize, f64, f64, f64)>,
}

impl Tracer for RecordingTracer {
    fn realloc(&mut self, k: usize, residual: f64, mass: f64, min_deficit: f64) {
        self.realloc_steps.push((k, residual, mass, min_deficit));
    }
}
