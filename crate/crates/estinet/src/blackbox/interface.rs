//! Declared interfaces for the exact functions, and the adapters that bridge
//! soft network outputs onto them.

use std::sync::Arc;

use super::functions::{bb_compare, bb_sum, bb_table_logic, CompareOp, TableOp, DIGIT_CLASSES};
use super::lookup::LookupTable;
use super::BbError;

/// Domain of one black-box argument.
#[derive(Debug, Clone, PartialEq)]
pub enum ArgDomain {
    /// Discrete class set of the given cardinality.
    Classes(usize),
    /// Finite real scalar; `ArgValue::None` is allowed where the interface
    /// declares the scalar optional.
    Scalar { optional: bool },
    /// Finite real vector.
    NumericVector,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ArgValue {
    Class(usize),
    Scalar(f64),
    Vector(Vec<f64>),
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OutputValue {
    Class(usize),
    Scalar(f64),
    Boolean(bool),
    BinaryVector(Vec<bool>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputDomain {
    Classes(usize),
    Scalar,
    Boolean,
    BinaryVector,
}

type BbCallable = Arc<dyn Fn(&[ArgValue]) -> Result<OutputValue, BbError> + Send + Sync>;

/// An opaque callable plus its declared argument and output domains. The
/// callable is deterministic and total on those domains.
#[derive(Clone)]
pub struct BlackBoxFunction {
    pub name: String,
    pub domains: Vec<ArgDomain>,
    pub output: OutputDomain,
    callable: BbCallable,
}

impl std::fmt::Debug for BlackBoxFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BlackBoxFunction")
            .field("name", &self.name)
            .field("domains", &self.domains)
            .field("output", &self.output)
            .finish()
    }
}

impl BlackBoxFunction {
    pub fn arity(&self) -> usize {
        self.domains.len()
    }

    fn check_args(&self, args: &[ArgValue]) -> Result<(), BbError> {
        if args.len() != self.domains.len() {
            return Err(BbError::Arity { expected: self.domains.len(), got: args.len() });
        }
        for (i, (domain, value)) in self.domains.iter().zip(args).enumerate() {
            let ok = match (domain, value) {
                (ArgDomain::Classes(n), ArgValue::Class(c)) => c < n,
                (ArgDomain::Scalar { .. }, ArgValue::Scalar(s)) => s.is_finite(),
                (ArgDomain::Scalar { optional: true }, ArgValue::None) => true,
                (ArgDomain::NumericVector, ArgValue::Vector(v)) => {
                    !v.is_empty() && v.iter().all(|x| x.is_finite())
                }
                _ => false,
            };
            if !ok {
                return Err(BbError::Domain(format!(
                    "argument {i} of {}: {value:?} not in {domain:?}",
                    self.name
                )));
            }
        }
        Ok(())
    }

    pub fn call(&self, args: &[ArgValue]) -> Result<OutputValue, BbError> {
        self.check_args(args)?;
        (self.callable)(args)
    }

    /// Digit-sequence sum over `k` class arguments.
    pub fn sum(k: usize) -> Self {
        BlackBoxFunction {
            name: format!("sum_{k}"),
            domains: vec![ArgDomain::Classes(DIGIT_CLASSES); k],
            output: OutputDomain::Scalar,
            callable: Arc::new(|args| {
                let digits: Vec<usize> = args
                    .iter()
                    .map(|a| match a {
                        ArgValue::Class(c) => Ok(*c),
                        other => Err(BbError::Domain(format!("{other:?} is not a class"))),
                    })
                    .collect::<Result<_, _>>()?;
                Ok(OutputValue::Scalar(bb_sum(&digits)? as f64))
            }),
        }
    }

    /// Table lookup over `k` digit classes.
    pub fn lookup(table: LookupTable) -> Self {
        let k = table.dimension();
        BlackBoxFunction {
            name: format!("lookup_{k}"),
            domains: vec![ArgDomain::Classes(DIGIT_CLASSES); k],
            output: OutputDomain::Classes(DIGIT_CLASSES),
            callable: Arc::new(move |args| {
                let digits: Vec<usize> = args
                    .iter()
                    .map(|a| match a {
                        ArgValue::Class(c) => Ok(*c),
                        other => Err(BbError::Domain(format!("{other:?} is not a class"))),
                    })
                    .collect::<Result<_, _>>()?;
                Ok(OutputValue::Class(table.get(&digits)?))
            }),
        }
    }

    /// Two-float comparison selected by a 2-way operator class.
    pub fn comparison() -> Self {
        BlackBoxFunction {
            name: "compare".into(),
            domains: vec![
                ArgDomain::Scalar { optional: false },
                ArgDomain::Scalar { optional: false },
                ArgDomain::Classes(2),
            ],
            output: OutputDomain::Boolean,
            callable: Arc::new(|args| {
                let (ArgValue::Scalar(x), ArgValue::Scalar(y), ArgValue::Class(op)) =
                    (&args[0], &args[1], &args[2])
                else {
                    return Err(BbError::Domain("comparison argument kinds".into()));
                };
                Ok(OutputValue::Boolean(bb_compare(
                    *x,
                    *y,
                    CompareOp::from_index(*op)?,
                )?))
            }),
        }
    }

    /// Five-way row logic over a numeric column: `(op, column, scalar)`.
    pub fn table_logic() -> Self {
        BlackBoxFunction {
            name: "table_logic".into(),
            domains: vec![
                ArgDomain::Classes(5),
                ArgDomain::NumericVector,
                ArgDomain::Scalar { optional: true },
            ],
            output: OutputDomain::BinaryVector,
            callable: Arc::new(|args| {
                let (ArgValue::Class(op), ArgValue::Vector(column)) = (&args[0], &args[1]) else {
                    return Err(BbError::Domain("table logic argument kinds".into()));
                };
                let scalar = match &args[2] {
                    ArgValue::Scalar(s) => Some(*s),
                    ArgValue::None => None,
                    other => {
                        return Err(BbError::Domain(format!("{other:?} is not a scalar")))
                    }
                };
                Ok(OutputValue::BinaryVector(bb_table_logic(
                    TableOp::from_index(*op)?,
                    column,
                    scalar,
                )?))
            }),
        }
    }
}

/// Hard selection from a distribution: argmax, ties broken by lowest index.
pub fn adapt_hard<T: PartialOrd + Copy>(distribution: &[T]) -> usize {
    let mut best = 0usize;
    for i in 1..distribution.len() {
        if distribution[i] > distribution[best] {
            best = i;
        }
    }
    best
}

/// Dataset entry produced by querying the function: the label is exactly
/// `bbf(args)`.
pub fn record_bb_pair(
    bbf: &BlackBoxFunction,
    adapted_args: Vec<ArgValue>,
) -> Result<(Vec<ArgValue>, OutputValue), BbError> {
    let label = bbf.call(&adapted_args)?;
    Ok((adapted_args, label))
}

/// Which side of the black box an adapter sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdapterDirection {
    NetworkToBlackBox,
    BlackBoxToLabel,
}

/// Deterministic bridging rule between soft network outputs and the function
/// interface (or between function outputs and label space).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AdapterRule {
    /// Distribution -> argmax class.
    ArgmaxHardSelection,
    /// Class index -> the concrete value it denotes (token, digit, column).
    ClassToToken,
    /// Pass-through.
    Identity,
    /// Row-indicator vector -> the names of the selected rows.
    IndexSetToRowNames,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adapter {
    pub direction: AdapterDirection,
    pub rule: AdapterRule,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adapt_hard_picks_argmax() {
        assert_eq!(adapt_hard(&[0.1, 0.7, 0.2]), 1);
    }

    #[test]
    fn adapt_hard_breaks_ties_low() {
        assert_eq!(adapt_hard(&[0.1f32; 10]), 0);
    }

    #[test]
    fn adapt_hard_one_hot_at_nine() {
        let mut d = [0.0f32; 10];
        d[9] = 1.0;
        assert_eq!(adapt_hard(&d), 9);
    }

    #[test]
    fn record_pair_sum() {
        let f = BlackBoxFunction::sum(2);
        let (args, label) =
            record_bb_pair(&f, vec![ArgValue::Class(1), ArgValue::Class(2)]).unwrap();
        assert_eq!(args.len(), 2);
        assert_eq!(label, OutputValue::Scalar(3.0));
    }

    #[test]
    fn record_pair_lookup_matches_generator() {
        let table = LookupTable::random(2, 17);
        let expected = table.get(&[3, 5]).unwrap();
        let f = BlackBoxFunction::lookup(table);
        let (_, label) =
            record_bb_pair(&f, vec![ArgValue::Class(3), ArgValue::Class(5)]).unwrap();
        assert_eq!(label, OutputValue::Class(expected));
    }

    #[test]
    fn record_pair_is_deterministic() {
        let f = BlackBoxFunction::sum(3);
        let args = vec![ArgValue::Class(4), ArgValue::Class(0), ArgValue::Class(9)];
        let (_, a) = record_bb_pair(&f, args.clone()).unwrap();
        let (_, b) = record_bb_pair(&f, args).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn domain_violations_are_rejected() {
        let f = BlackBoxFunction::sum(2);
        assert!(f.call(&[ArgValue::Class(1)]).is_err());
        assert!(f
            .call(&[ArgValue::Class(1), ArgValue::Scalar(2.0)])
            .is_err());
        let g = BlackBoxFunction::comparison();
        assert!(g
            .call(&[
                ArgValue::Scalar(f64::NAN),
                ArgValue::Scalar(1.0),
                ArgValue::Class(0)
            ])
            .is_err());
    }

    #[test]
    fn repeated_calls_agree() {
        let f = BlackBoxFunction::table_logic();
        let args = vec![
            ArgValue::Class(TableOp::Max.index()),
            ArgValue::Vector(vec![1.0, 5.0, 5.0]),
            ArgValue::None,
        ];
        let first = f.call(&args).unwrap();
        for _ in 0..2 {
            assert_eq!(f.call(&args).unwrap(), first);
        }
        assert_eq!(
            first,
            OutputValue::BinaryVector(vec![false, true, true])
        );
    }

    #[test]
    fn hardening_a_one_hot_is_lossless() {
        // bbf(adapt_hard(one_hot(x))) == bbf(x) for discrete arguments.
        let table = LookupTable::random(2, 3);
        let f = BlackBoxFunction::lookup(table);
        for x in [0usize, 4, 9] {
            let mut one_hot = vec![0.0f32; 10];
            one_hot[x] = 1.0;
            let hard = adapt_hard(&one_hot);
            assert_eq!(hard, x);
            let direct = f.call(&[ArgValue::Class(x), ArgValue::Class(2)]).unwrap();
            let via = f.call(&[ArgValue::Class(hard), ArgValue::Class(2)]).unwrap();
            assert_eq!(direct, via);
        }
    }
}
