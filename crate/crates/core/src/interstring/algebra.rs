use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

type OpFn = Arc<dyn Fn(&[u64], u64) -> u64 + Send + Sync>;

/// One operator of an algebra. The function receives its arguments and the
/// value mask; results are masked again by the algebra.
#[derive(Clone)]
pub struct Operator {
    pub arity: usize,
    f: OpFn,
}

impl fmt::Debug for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Operator").field("arity", &self.arity).finish()
    }
}

/// Unsigned integers modulo `2^width` with a named operator table.
#[derive(Clone, Debug)]
pub struct Algebra {
    width: u32,
    ops: BTreeMap<String, Operator>,
}

impl Algebra {
    /// An algebra with no operators.
    pub fn empty(width: u32) -> Self {
        assert!((1..=64).contains(&width), "algebra width must be 1..=64");
        Self {
            width,
            ops: BTreeMap::new(),
        }
    }

    /// `add sub mul and or xor not shl shr eq lt mov` over `width` bits.
    pub fn standard(width: u32) -> Self {
        let w = width;
        Self::empty(width)
            .with_op("add", 2, |a, _| a[0].wrapping_add(a[1]))
            .with_op("sub", 2, |a, _| a[0].wrapping_sub(a[1]))
            .with_op("mul", 2, |a, _| a[0].wrapping_mul(a[1]))
            .with_op("and", 2, |a, _| a[0] & a[1])
            .with_op("or", 2, |a, _| a[0] | a[1])
            .with_op("xor", 2, |a, _| a[0] ^ a[1])
            .with_op("not", 1, |a, _| !a[0])
            .with_op("shl", 2, move |a, _| if a[1] >= u64::from(w) { 0 } else { a[0] << a[1] })
            .with_op("shr", 2, move |a, _| if a[1] >= u64::from(w) { 0 } else { a[0] >> a[1] })
            .with_op("eq", 2, |a, _| u64::from(a[0] == a[1]))
            .with_op("lt", 2, |a, _| u64::from(a[0] < a[1]))
            .with_op("mov", 1, |a, _| a[0])
    }

    pub fn with_op(
        mut self,
        name: &str,
        arity: usize,
        f: impl Fn(&[u64], u64) -> u64 + Send + Sync + 'static,
    ) -> Self {
        self.ops.insert(name.to_string(), Operator { arity, f: Arc::new(f) });
        self
    }

    /// Keeps only the named operators.
    pub fn restricted(mut self, names: &[&str]) -> Self {
        self.ops.retain(|k, _| names.contains(&k.as_str()));
        self
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn mask(&self) -> u64 {
        if self.width == 64 {
            u64::MAX
        } else {
            (1 << self.width) - 1
        }
    }

    pub fn operator(&self, name: &str) -> Option<&Operator> {
        self.ops.get(name)
    }

    pub fn arity(&self, name: &str) -> Option<usize> {
        self.ops.get(name).map(|o| o.arity)
    }

    /// Applies `name`; `None` when the operator is unknown or the argument
    /// count does not match its arity.
    pub fn apply(&self, name: &str, args: &[u64]) -> Option<u64> {
        let op = self.ops.get(name)?;
        if op.arity != args.len() {
            return None;
        }
        let mask = self.mask();
        let masked: Vec<u64> = args.iter().map(|a| a & mask).collect();
        Some((op.f)(&masked, mask) & mask)
    }
}
