//! Polynomials, scalar expressions, and their parser.

mod expr;
mod parser;
mod polynomial;

pub use expr::{BinaryOp, Expr, Function, ScalarExpression, ACOS_SLACK};
pub use parser::{
    parse_polynomial, parse_scalar_expression, parse_scalar_expression_with, Definitions,
};
pub use polynomial::{
    CompiledPolynomial, EvalScalar, ExponentVector, Polynomial, PolynomialSystem, PowerTable,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown identifier `{name}` at line {line}, column {column}")]
    UnknownIdentifier {
        name: String,
        line: usize,
        column: usize,
    },
    #[error("unknown function `{name}` at line {line}, column {column}")]
    UnknownFunction {
        name: String,
        line: usize,
        column: usize,
    },
    #[error("invalid exponent at line {line}, column {column}: {message}")]
    BadExponent {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("expression is not a polynomial: {0}")]
    NotPolynomial(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("invalid variable name `{0}`")]
    InvalidVariableName(String),
    #[error("duplicate variable `{0}`")]
    DuplicateVariable(String),
    #[error("variable list is empty")]
    NoVariables,
    #[error("operands use different variable lists")]
    VariableMismatch,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("domain error ({reason}) at point {point:?}")]
    Domain { reason: String, point: Vec<f64> },
}

/// Convenience for building owned variable lists.
pub fn variable_names<S: AsRef<str>>(names: &[S]) -> Vec<String> {
    names.iter().map(|s| s.as_ref().to_string()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use proptest::prelude::*;

    const EQ1: &str = "x^4+y^4-3*x^2-x*y^2-y+1";

    fn xy() -> Vec<String> {
        variable_names(&["x", "y"])
    }

    #[test]
    fn parses_circle() {
        let p = parse_polynomial("x^2 + y^2 - 1", &xy()).unwrap();
        assert_eq!(p.num_terms(), 3);
        assert_eq!(p.degree(), 2);
    }

    #[test]
    fn parses_quartic_curve() {
        let p = parse_polynomial(EQ1, &xy()).unwrap();
        assert_eq!(p.num_terms(), 6);
        assert_eq!(p.degree(), 4);
    }

    #[test]
    fn cancellation_gives_zero_polynomial() {
        let p = parse_polynomial("x + x - 2*x", &variable_names(&["x"])).unwrap();
        assert!(p.is_zero());
        assert_eq!(p.num_terms(), 0);
    }

    #[test]
    fn implicit_multiplication_rejected() {
        let err = parse_polynomial("3x", &variable_names(&["x"])).unwrap_err();
        assert!(matches!(err, ExprError::Syntax { line: 1, column: 2, .. }), "{err:?}");
    }

    #[test]
    fn syntax_errors_carry_line_and_column() {
        let err = parse_polynomial("x^2 +\n  * y", &xy()).unwrap_err();
        assert_eq!(
            err,
            ExprError::Syntax {
                line: 2,
                column: 3,
                message: "unexpected token Star".into()
            }
        );
    }

    #[test]
    fn unknown_identifier_and_bad_exponents() {
        assert!(matches!(
            parse_polynomial("x + z", &xy()),
            Err(ExprError::UnknownIdentifier { ref name, line: 1, column: 5 }) if name == "z"
        ));
        assert!(matches!(
            parse_polynomial("x^2.5", &xy()),
            Err(ExprError::BadExponent { .. })
        ));
        assert!(matches!(
            parse_polynomial("x^-1", &xy()),
            Err(ExprError::BadExponent { .. })
        ));
        assert!(matches!(
            parse_polynomial("exp(x)", &xy()),
            Err(ExprError::Syntax { .. })
        ));
        assert!(matches!(
            parse_polynomial("1/x", &xy()),
            Err(ExprError::NotPolynomial(_))
        ));
    }

    #[test]
    fn duplicate_or_empty_variables_rejected() {
        assert!(matches!(
            parse_polynomial("x", &variable_names(&["x", "x"])),
            Err(ExprError::DuplicateVariable(_))
        ));
        assert!(matches!(
            parse_polynomial("1", &[]),
            Err(ExprError::NoVariables)
        ));
    }

    #[test]
    fn division_by_constant_is_polynomial() {
        let p = parse_polynomial("(x/3)^2 + y^2 - 1", &xy()).unwrap();
        assert!((p.evaluate(&[3.0, 0.0]).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn scalar_expressions_evaluate() {
        let f = parse_scalar_expression("exp(2*y)", &xy()).unwrap();
        let v = f.evaluate(&[0.0, 1.0]).unwrap();
        assert!((v - 7.389_056_098_930_65).abs() < 1e-12);
        let one = parse_scalar_expression("1", &xy()).unwrap();
        assert_eq!(one.evaluate(&[0.3, -2.0]).unwrap(), 1.0);
        let a = parse_scalar_expression("acos(0)", &xy()).unwrap();
        assert!((a.evaluate(&[0.0, 0.0]).unwrap() - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn comparisons_are_indicators() {
        let f = parse_scalar_expression("abs(x - 1) < 0.5", &xy()).unwrap();
        assert_eq!(f.evaluate(&[1.2, 0.0]).unwrap(), 1.0);
        assert_eq!(f.evaluate(&[1.6, 0.0]).unwrap(), 0.0);
        let g = parse_scalar_expression("x^(-2) * (y >= 0)", &xy()).unwrap();
        assert_eq!(g.evaluate(&[2.0, 0.0]).unwrap(), 0.25);
    }

    #[test]
    fn unknown_function_is_reported() {
        assert!(matches!(
            parse_scalar_expression("tan(x)", &xy()),
            Err(ExprError::UnknownFunction { .. })
        ));
    }

    #[test]
    fn domain_errors_carry_the_point() {
        let f = parse_scalar_expression("1/x", &xy()).unwrap();
        match f.evaluate(&[0.0, 2.0]) {
            Err(ExprError::Domain { point, .. }) => assert_eq!(point, vec![0.0, 2.0]),
            other => panic!("{other:?}"),
        }
        let g = parse_scalar_expression("acos(x)", &xy()).unwrap();
        assert!(g.evaluate(&[1.5, 0.0]).is_err());
        assert_eq!(g.evaluate(&[1.0 + 1e-15, 0.0]).unwrap(), 0.0);
        let h = parse_scalar_expression("log(x) + sqrt(y)", &xy()).unwrap();
        assert!(h.evaluate(&[-1.0, 1.0]).is_err());
        assert!(h.evaluate(&[1.0, -1.0]).is_err());
    }

    #[test]
    fn definitions_are_inlined() {
        let mut defs = Definitions::new();
        defs.insert(
            "r2".into(),
            parse_scalar_expression("x^2 + y^2", &xy()).unwrap(),
        );
        let f = parse_scalar_expression_with("sqrt(r2) * pi", &xy(), &defs).unwrap();
        assert!((f.evaluate(&[3.0, 4.0]).unwrap() - 5.0 * std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn evaluation_examples() {
        let p = parse_polynomial(EQ1, &xy()).unwrap();
        assert_eq!(p.evaluate(&[0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(p.evaluate(&[1.0, 1.0]).unwrap(), -2.0);
        let q = parse_polynomial("x^2 + y^2", &xy()).unwrap();
        let v = q
            .evaluate_complex(&[Complex64::new(0.0, 1.0), Complex64::new(0.0, 0.0)])
            .unwrap();
        assert_eq!(v, Complex64::new(-1.0, 0.0));
        assert!(matches!(
            p.evaluate(&[1.0]),
            Err(ExprError::DimensionMismatch { expected: 2, found: 1 })
        ));
    }

    #[test]
    fn derivative_examples() {
        let circle = parse_polynomial("x^2 + y^2 - 1", &xy()).unwrap();
        assert_eq!(
            circle.differentiate("x").unwrap(),
            parse_polynomial("2*x", &xy()).unwrap()
        );
        let p = parse_polynomial(EQ1, &xy()).unwrap();
        assert_eq!(
            p.differentiate("y").unwrap(),
            parse_polynomial("4*y^3 - 2*x*y - 1", &xy()).unwrap()
        );
        let c = parse_polynomial("5", &xy()).unwrap();
        assert!(c.differentiate("x").unwrap().is_zero());
        assert!(matches!(
            c.differentiate("w"),
            Err(ExprError::UnknownVariable(_))
        ));
    }

    fn system(texts: &[&str], vars: &[String]) -> PolynomialSystem {
        let polys = texts
            .iter()
            .map(|t| parse_polynomial(t, vars).unwrap())
            .collect();
        PolynomialSystem::new(vars, polys).unwrap()
    }

    #[test]
    fn jacobian_examples() {
        let circle = system(&["x^2 + y^2 - 1"], &xy());
        assert_eq!(circle.jacobian(&[1.0, 0.0]).unwrap(), vec![vec![2.0, 0.0]]);
        let s = system(&["x^2 + y^2 - 5", "x*y - 2"], &xy());
        assert_eq!(
            s.jacobian(&[1.0, 2.0]).unwrap(),
            vec![vec![2.0, 4.0], vec![2.0, 1.0]]
        );
        assert!(s.jacobian(&[1.0, 2.0, 3.0]).is_err());
    }

    fn cyclohexane_ungauged() -> PolynomialSystem {
        let names: Vec<String> = (1..=6)
            .flat_map(|i| ["x", "y", "z"].map(|c| format!("{c}{i}")))
            .collect();
        let eqs: Vec<String> = (1..=6)
            .map(|i| {
                let j = i % 6 + 1;
                format!("(x{i}-x{j})^2 + (y{i}-y{j})^2 + (z{i}-z{j})^2 - 1")
            })
            .collect();
        let refs: Vec<&str> = eqs.iter().map(String::as_str).collect();
        system(&refs, &names)
    }

    #[test]
    fn bezout_examples() {
        assert_eq!(
            system(&["x^2 + y^2 - 5", "x*y - 2"], &xy()).bezout_number(),
            4
        );
        assert_eq!(cyclohexane_ungauged().bezout_number(), 64);
        let trott = system(
            &["144*(x^4+y^4) - 225*(x^2+y^2) + 350*x^2*y^2 + 81"],
            &xy(),
        );
        assert_eq!(trott.bezout_number(), 4);
    }

    #[test]
    fn bezout_invariant_under_reordering() {
        let vars = variable_names(&["a", "b", "c"]);
        let texts = ["a^3 - b", "a*b*c - 1", "c^2 + a"];
        let s1 = system(&texts, &vars);
        let s2 = system(&[texts[2], texts[0], texts[1]], &vars);
        let rev: Vec<String> = vars.iter().rev().cloned().collect();
        let s3 = system(&texts, &rev);
        assert_eq!(s1.bezout_number(), 18);
        assert_eq!(s2.bezout_number(), 18);
        assert_eq!(s3.bezout_number(), 18);
    }

    fn arb_polynomial() -> impl Strategy<Value = Polynomial> {
        prop::collection::vec(
            (prop::collection::vec(0u32..4, 3), -5.0f64..5.0),
            0..8,
        )
        .prop_map(|terms| {
            Polynomial::from_terms(&variable_names(&["x", "y", "z"]), terms).unwrap()
        })
    }

    proptest! {
        #[test]
        fn print_parse_round_trip(p in arb_polynomial()) {
            let text = p.to_string();
            let q = parse_polynomial(&text, p.variables()).unwrap();
            prop_assert_eq!(p, q);
        }

        #[test]
        fn complex_evaluation_restricts_to_real(
            p in arb_polynomial(),
            x in prop::collection::vec(-3.0f64..3.0, 3),
        ) {
            let real = p.evaluate(&x).unwrap();
            let cx: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            let complex = p.evaluate(&cx).unwrap();
            prop_assert_eq!(real.to_bits(), complex.re.to_bits());
        }

        #[test]
        fn derivatives_match_central_differences(
            p in arb_polynomial(),
            points in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 3), 100),
        ) {
            // finite-difference oracle, independent of symbolic differentiation
            let h = 1e-5;
            for x in &points {
                for (j, var) in ["x", "y", "z"].iter().enumerate() {
                    let d = p.differentiate(var).unwrap().evaluate(x).unwrap();
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[j] += h;
                    xm[j] -= h;
                    let fd = (p.evaluate(&xp).unwrap() - p.evaluate(&xm).unwrap()) / (2.0 * h);
                    let scale = 1.0 + d.abs() + p.max_abs_coefficient() * 1e-3;
                    prop_assert!((d - fd).abs() <= 1e-6 * scale, "{} vs {}", d, fd);
                }
            }
        }

        #[test]
        fn jacobian_matches_finite_differences(
            a in arb_polynomial(),
            b in arb_polynomial(),
            x in prop::collection::vec(-2.0f64..2.0, 3),
        ) {
            let vars = a.variables().to_vec();
            let sys = PolynomialSystem::new(&vars, vec![a, b]).unwrap();
            let jac = sys.jacobian(&x).unwrap();
            let h = 1e-5;
            for j in 0..3 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[j] += h;
                xm[j] -= h;
                let fp = sys.evaluate(&xp).unwrap();
                let fm = sys.evaluate(&xm).unwrap();
                for i in 0..2 {
                    let fd: f64 = (fp[i] - fm[i]) / (2.0 * h);
                    prop_assert!((jac[i][j] - fd).abs() <= 1e-6 * (1.0 + jac[i][j].abs() + 5e-3 * 5.0));
                }
            }
        }
    }
}
