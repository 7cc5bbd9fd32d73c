//! Properties of constructor computation and of type analysis, checked on
//! generated constructors.

use proptest::prelude::*;
use tracelinks_core::normalize::step;
use tracelinks_core::stdlib::Stdlib;
use tracelinks_core::syntax::{parse, parse_constructor, print, print_con, Env};
use tracelinks_core::typecheck::type_of;
use tracelinks_core::types::{
    classify_constructor, con_equiv, kind_of_constructor, normalize_constructor, reduce_constructor_step,
    types_equal, ConstructorClass,
};
use tracelinks_core::{Constructor, Context, Kind, Type};

const LABELS: [&str; 3] = ["k", "l", "m"];

/// Closed query-type constructors in normal form.
fn query_con() -> impl Strategy<Value = Constructor> {
    let leaf = prop_oneof![Just(Constructor::BoolC), Just(Constructor::IntC), Just(Constructor::StringC)];
    leaf.prop_recursive(3, 16, 3, |inner| {
        prop_oneof![
            inner.clone().prop_map(Constructor::list),
            proptest::collection::vec(inner, 0..=3).prop_map(|cs| {
                Constructor::record_of(cs.into_iter().enumerate().map(|(i, c)| (LABELS[i].into(), c)))
            }),
        ]
    })
}

/// Type-level functions of kind `Type -> Type` from the standard library
/// and a few small lambdas.
fn functions() -> Vec<Constructor> {
    let lib = Stdlib::load().expect("stdlib loads");
    let mut fs: Vec<Constructor> = ["TRACE", "VALUE", "WHERE", "LINEAGE", "WHERE_T", "LINEAGE_T"]
        .iter()
        .map(|n| lib.constructor(n).expect("builtin constructor").clone())
        .collect();
    for src in ["\\a. [a]", "\\a. {k : a, l : Int}", "\\a. (\\b. Trace b) a"] {
        fs.push(parse_constructor(src, &Env::default()).expect("parses"));
    }
    fs
}

/// Closed constructors of kind `Type` with pending computation.
fn computing_con() -> impl Strategy<Value = Constructor> {
    let fs = functions();
    let value = fs[1].clone();
    let n = fs.len();
    query_con().prop_recursive(3, 24, 3, move |inner| {
        let fs = fs.clone();
        let value = value.clone();
        prop_oneof![
            (0..n, inner.clone()).prop_map(move |(i, c)| Constructor::app(fs[i].clone(), c)),
            inner.clone().prop_map(Constructor::trace),
            inner.clone().prop_map(Constructor::list),
            proptest::collection::vec(inner.clone(), 1..=3).prop_map(move |cs| {
                let row = Constructor::row(cs.into_iter().enumerate().map(|(i, c)| (LABELS[i].into(), c)));
                Constructor::record(Constructor::rmap(value.clone(), row))
            }),
            inner.prop_map(|c| {
                let Constructor::Lam(_, _, body) = parse_constructor(
                    "\\x. Typerec x (Int, Int, Int, \\_. \\b. [b], \\_:Row. \\r:Row. Record r, \\_. \\b. b)",
                    &Env::default(),
                )
                .expect("parses") else {
                    unreachable!()
                };
                tracelinks_core::syntax::subst_con_in_con(&body, "x", &c)
            }),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    /// Each computation step keeps the kind, and a step exists exactly
    /// when the constructor is not in normal form.
    #[test]
    fn constructor_steps_preserve_kind_and_progress(c in computing_con()) {
        let mut ctx = Context::new();
        let k = kind_of_constructor(&mut ctx, &c).expect("generated constructors are well-kinded");
        prop_assert_eq!(&k, &Kind::Type);
        let mut cur = c;
        for _ in 0..10_000 {
            let next = reduce_constructor_step(&cur);
            let class = classify_constructor(&cur);
            prop_assert_eq!(class == ConstructorClass::NotNormal, next.is_some(), "{}", print_con(&cur));
            let Some(next) = next else { break };
            let k2 = kind_of_constructor(&mut ctx, &next);
            prop_assert_eq!(k2.as_ref(), Ok(&k), "{}", print_con(&next));
            cur = next;
        }
        prop_assert_ne!(classify_constructor(&cur), ConstructorClass::NotNormal);
    }

    /// Full normalization agrees with stepping and is stable.
    #[test]
    fn normal_forms_are_equivalent_and_stable(c in computing_con()) {
        let nf = normalize_constructor(&c).expect("closed constructors normalize");
        prop_assert!(reduce_constructor_step(&nf).is_none());
        prop_assert!(con_equiv(&c, &nf).expect("comparable"));
        prop_assert_eq!(normalize_constructor(&nf).expect("normal"), nf);
    }

    /// Printing a constructor and parsing it back gives the same constructor.
    #[test]
    fn constructors_print_and_parse_back(c in computing_con()) {
        let text = print_con(&c);
        let back = parse_constructor(&text, &Env::default()).map_err(|e| TestCaseError::fail(format!("{e}: {text}")))?;
        prop_assert!(tracelinks_core::syntax::alpha_equal_con(&back, &c), "{}", text);
    }

    /// Typing a `typecase` on a list constructor before and after the step
    /// that selects the list branch gives the motive at that constructor.
    #[test]
    fn typecase_list_branch_keeps_the_motive_type(c in query_con()) {
        let src = format!(
            "typecase [{}] return z. T(z) -> T(z) of {{
               Bool => \\x : Bool. x,
               Int => \\x : Int. x,
               String => \\x : String. x,
               List b => \\x : T([b]). for (y <- x) [y],
               Record r => \\x : T(Record r). x,
               Trace b => \\x : T(Trace b). x }}",
            print_con(&c)
        );
        let m = parse(&src).expect("parses").main;
        let ctx = Context::new();
        let at = Type::Embed(Constructor::list(c.clone()));
        let expected = Type::fun(at.clone(), at);
        let before = type_of(&ctx, &m).expect("typecase typechecks");
        prop_assert!(types_equal(&ctx, &before, &expected).expect("comparable"));
        let reduct = step(&m).expect("a closed typecase steps");
        let after = type_of(&ctx, &reduct).map_err(|e| TestCaseError::fail(format!("{e}: {}", print(&reduct))))?;
        prop_assert!(types_equal(&ctx, &after, &expected).expect("comparable"), "{} : {}", print(&reduct), after);
    }
}
