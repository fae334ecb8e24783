use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use spikeforge_core::expr::{Environment, ExprError, Expression};
use spikeforge_core::vocab;

/// Independent expression tree used to generate inputs and to compute the
/// expected value with std floating-point functions.
#[derive(Debug, Clone)]
enum Tree {
    Num(f64),
    Var(&'static str),
    Neg(Box<Tree>),
    Bin(char, Box<Tree>, Box<Tree>),
    Call(&'static str, Vec<Tree>),
}

const VARS: [&str; 3] = ["x", "y", "z"];

impl Tree {
    fn source(&self) -> String {
        match self {
            Tree::Num(v) => format!("{v}"),
            Tree::Var(n) => n.to_string(),
            Tree::Neg(a) => format!("(-{})", a.source()),
            Tree::Bin(op, a, b) => format!("({} {op} {})", a.source(), b.source()),
            Tree::Call(f, args) => {
                let args: Vec<String> = args.iter().map(Tree::source).collect();
                format!("{f}({})", args.join(", "))
            }
        }
    }

    /// `None` where evaluation must fail.
    fn eval(&self, env: &BTreeMap<&str, f64>) -> Option<f64> {
        Some(match self {
            Tree::Num(v) => *v,
            Tree::Var(n) => env[n],
            Tree::Neg(a) => -a.eval(env)?,
            Tree::Bin(op, a, b) => {
                let (a, b) = (a.eval(env)?, b.eval(env)?);
                match op {
                    '+' => a + b,
                    '-' => a - b,
                    '*' => a * b,
                    '/' if b == 0.0 => return None,
                    '/' => a / b,
                    _ => pow(a, b)?,
                }
            }
            Tree::Call(f, args) => {
                let x = args[0].eval(env)?;
                match *f {
                    "exp" => x.exp(),
                    "log" if x <= 0.0 => return None,
                    "log" => x.ln(),
                    "abs" => x.abs(),
                    "tanh" => x.tanh(),
                    "sqrt" if x < 0.0 => return None,
                    "sqrt" => x.sqrt(),
                    "min" => x.min(args[1].eval(env)?),
                    "max" => x.max(args[1].eval(env)?),
                    _ => pow(x, args[1].eval(env)?)?,
                }
            }
        })
    }

    fn vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Tree::Num(_) => {}
            Tree::Var(n) => {
                out.insert(n.to_string());
            }
            Tree::Neg(a) => a.vars(out),
            Tree::Bin(_, a, b) => {
                a.vars(out);
                b.vars(out);
            }
            Tree::Call(_, args) => args.iter().for_each(|a| a.vars(out)),
        }
    }
}

fn pow(a: f64, b: f64) -> Option<f64> {
    let v = a.powf(b);
    (!v.is_nan() && !(a == 0.0 && b < 0.0)).then_some(v)
}

fn leaf() -> impl Strategy<Value = Tree> {
    prop_oneof![
        (0u32..20_000).prop_map(|n| Tree::Num(f64::from(n) / 1000.0)),
        prop::sample::select(VARS.to_vec()).prop_map(Tree::Var),
    ]
}

fn tree() -> impl Strategy<Value = Tree> {
    leaf().prop_recursive(6, 64, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|a| Tree::Neg(Box::new(a))),
            (
                prop::sample::select(vec!['+', '-', '*', '/', '^']),
                inner.clone(),
                inner.clone()
            )
                .prop_map(|(op, a, b)| Tree::Bin(op, Box::new(a), Box::new(b))),
            (
                prop::sample::select(vec!["exp", "log", "abs", "tanh", "sqrt"]),
                inner.clone()
            )
                .prop_map(|(f, a)| Tree::Call(f, vec![a])),
            (
                prop::sample::select(vec!["min", "max", "pow"]),
                inner.clone(),
                inner
            )
                .prop_map(|(f, a, b)| Tree::Call(f, vec![a, b])),
        ]
    })
}

fn bindings() -> impl Strategy<Value = [f64; 3]> {
    [-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn agrees_with_reference_interpreter(t in tree(), values in bindings()) {
        let env_map: BTreeMap<&str, f64> = VARS.iter().copied().zip(values).collect();
        let env = VARS.iter().zip(values).fold(Environment::new(), |e, (n, v)| e.with(n, v));
        let parsed = Expression::parse(&t.source()).unwrap();
        let expected = t.eval(&env_map).filter(|v| v.is_finite());
        let got = parsed.eval(&env);
        match expected {
            // libm and std may round the last bit differently, which can
            // flip overflow right at the edge of the f64 range.
            Some(v) if v.abs() > 1e250 => {}
            Some(v) => {
                let g = got.unwrap();
                let scale = v.abs().max(1.0);
                prop_assert!((g - v).abs() <= 1e-12 * scale, "{} => {g} vs {v}", t.source());
            }
            None => prop_assert!(got.is_err(), "{} should fail, got {got:?}", t.source()),
        }
    }

    #[test]
    fn display_round_trips(t in tree()) {
        let e = Expression::parse(&t.source()).unwrap();
        let again = Expression::parse(&e.to_string()).unwrap();
        prop_assert_eq!(&e, &again);
        prop_assert_eq!(e.to_string(), again.to_string());
    }

    #[test]
    fn free_vars_match_tree(t in tree()) {
        let mut expected = BTreeSet::new();
        t.vars(&mut expected);
        prop_assert_eq!(Expression::parse(&t.source()).unwrap().free_vars(), expected);
    }
}

fn eval(src: &str) -> Result<f64, ExprError> {
    Expression::parse(src)?.eval(&Environment::new())
}

#[test]
fn precedence_examples() {
    assert_eq!(eval("1 + 2 * 3").unwrap(), 7.0);
    assert_eq!(eval("2 ^ 3 ^ 2").unwrap(), 512.0);
    assert_eq!(eval("-2 ^ 2").unwrap(), -4.0);
    assert_eq!(eval("(1 - 2) - 3").unwrap(), -4.0);
    assert_eq!(eval("1 - 2 - 3").unwrap(), -4.0);
    assert_eq!(eval("8 / 4 / 2").unwrap(), 1.0);
    assert_eq!(eval("max(1, min(5, 3))").unwrap(), 3.0);
    assert_eq!(eval("2.5e-3 * 1E3").unwrap(), 2.5);
}

#[test]
fn error_examples() {
    assert_eq!(eval("1 / 0"), Err(ExprError::DivisionByZero));
    assert!(matches!(
        eval("log(0)"),
        Err(ExprError::Domain { func: "log", .. })
    ));
    assert!(matches!(
        eval("sqrt(-1)"),
        Err(ExprError::Domain { func: "sqrt", .. })
    ));
    assert!(matches!(
        eval("foo(1)"),
        Err(ExprError::UnknownFunction { .. })
    ));
    assert!(matches!(
        eval("min(1)"),
        Err(ExprError::Arity {
            expected: 2,
            found: 1,
            ..
        })
    ));
    assert!(matches!(eval("1 +"), Err(ExprError::Syntax { .. })));
    assert!(matches!(eval("(1"), Err(ExprError::Syntax { .. })));
    assert!(matches!(eval("exp(1000)"), Err(ExprError::NonFinite)));
    assert_eq!(eval("x"), Err(ExprError::Unbound("x".into())));
}

#[test]
fn compile_reports_allowed_names() {
    let constants = BTreeMap::from([("k".to_string(), 2.0)]);
    let e = Expression::parse("V_bogus + k").unwrap();
    let err = e.compile(&vocab::NAMES, &constants).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("V_bogus"));
    for name in vocab::NAMES {
        assert!(msg.contains(name), "{msg} lacks {name}");
    }

    let e = Expression::parse("G * V_TB * k").unwrap();
    let p = e.compile(&vocab::NAMES, &constants).unwrap();
    let mut slots = vocab::Slots::default();
    slots[vocab::G] = 2e-6;
    slots[vocab::V_TB] = 0.5;
    assert_eq!(p.eval(slots.as_slice()).unwrap(), 2e-6);
}
