/// Q(u_t, u_r) = a·u_t² + b·u_r² + c·u_t·u_r.
///
/// Only forms with c = 0 come from a rotation-invariant quadratic form in (∂_t u, ∇u);
/// the cross term is kept as an exploratory generalisation and flagged in every report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticForm {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl QuadraticForm {
    pub const fn new(a: f64, b: f64, c: f64) -> Self {
        QuadraticForm { a, b, c }
    }

    pub const fn zero() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    /// Q = u_t², the default non-null form.
    pub const fn ut_squared() -> Self {
        Self::new(1.0, 0.0, 0.0)
    }

    /// Q = u_t² - u_r².
    pub const fn null_form() -> Self {
        Self::new(1.0, -1.0, 0.0)
    }

    #[inline]
    pub fn eval(&self, ut: f64, ur: f64) -> f64 {
        self.a * ut * ut + self.b * ur * ur + self.c * ut * ur
    }

    pub fn rotation_invariant(&self) -> bool {
        self.c == 0.0
    }

    pub fn is_zero(&self) -> bool {
        self.a == 0.0 && self.b == 0.0 && self.c == 0.0
    }

    /// max |Q(x, y)| / (x² + y²), used to bound the forcing.
    pub fn operator_norm(&self) -> f64 {
        let (a, b, h) = (self.a, self.b, 0.5 * self.c);
        let mean = 0.5 * (a + b);
        let rad = (0.25 * (a - b) * (a - b) + h * h).sqrt();
        (mean + rad).abs().max((mean - rad).abs())
    }

    pub fn describe(&self) -> String {
        format!("{},{},{}", self.a, self.b, self.c)
    }
}

/// Free-function form of [`QuadraticForm::eval`].
pub fn eval_q(form: &QuadraticForm, ut: f64, ur: f64) -> f64 {
    form.eval(ut, ur)
}
