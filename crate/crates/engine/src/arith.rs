//! Integer arithmetic for `is/2` and the comparison builtins.


use crate::error::EngineError;
use crate::term::Term;
use crate::unify::{deref, Store};

type Res<T> = Result<T, EngineError>;

fn overflow() -> EngineError {
    EngineError::evaluation("int_overflow")
}

fn checked(v: Option<i64>) -> Res<i64> {
    v.ok_or_else(overflow)
}

fn nonzero(d: i64) -> Res<i64> {
    if d == 0 {
        Err(EngineError::evaluation("zero_divisor"))
    } else {
        Ok(d)
    }
}

fn pow(base: i64, exp: i64) -> Res<i64> {
    if exp < 0 {
        return match base {
            1 => Ok(1),
            -1 => Ok(if exp % 2 == 0 { 1 } else { -1 }),
            0 => Err(EngineError::evaluation("zero_divisor")),
            _ => Err(EngineError::evaluation("undefined")),
        };
    }
    let exp = u32::try_from(exp).map_err(|_| overflow())?;
    checked(base.checked_pow(exp))
}

fn shift(v: i64, by: i64, left: bool) -> Res<i64> {
    let by = u32::try_from(by).map_err(|_| EngineError::evaluation("undefined"))?;
    if left {
        let r = v.checked_shl(by).ok_or_else(overflow)?;
        if r >> by != v {
            return Err(overflow());
        }
        Ok(r)
    } else {
        Ok(if by >= 64 { if v < 0 { -1 } else { 0 } } else { v >> by })
    }
}

/// Evaluates an arithmetic expression. Only integers exist: `/` truncates
/// toward zero like `//`.
pub(crate) fn eval<S: Store + ?Sized>(s: &S, t: &Term) -> Res<i64> {
    let t = deref(s, t);
    match &t {
        Term::Int(v) => Ok(*v),
        Term::Var(_) => Err(EngineError::instantiation()),
        Term::Atom(a) => match a.name() {
            "max_tagged_integer" => Ok((1 << 60) - 1),
            "min_tagged_integer" => Ok(-(1 << 60)),
            _ => Err(EngineError::type_error("evaluable", &t)),
        },
        Term::Compound(c) => {
            let name = c.functor().name();
            let args = c.args();
            if args.len() == 1 {
                let x = eval(s, &args[0])?;
                return match name {
                    "-" => checked(x.checked_neg()),
                    "+" => Ok(x),
                    "abs" => checked(x.checked_abs()),
                    "sign" => Ok(x.signum()),
                    "\\" => Ok(!x),
                    "msb" if x > 0 => Ok(63 - x.leading_zeros() as i64),
                    "succ" => checked(x.checked_add(1)),
                    "integer" | "truncate" | "round" | "ceiling" | "floor" => Ok(x),
                    _ => Err(EngineError::type_error("evaluable", &t)),
                };
            }
            if args.len() == 2 {
                // `[X]` evaluates X
                if c.functor() == crate::term::atoms::DOT {
                    let tail = deref(s, &args[1]);
                    if tail == Term::nil() {
                        return eval(s, &args[0]);
                    }
                    return Err(EngineError::type_error("evaluable", &t));
                }
                let x = eval(s, &args[0])?;
                let y = eval(s, &args[1])?;
                return match name {
                    "+" => checked(x.checked_add(y)),
                    "-" => checked(x.checked_sub(y)),
                    "*" => checked(x.checked_mul(y)),
                    "/" | "//" => checked(x.checked_div(nonzero(y)?)),
                    "rem" => checked(x.checked_rem(nonzero(y)?)),
                    "mod" => {
                        let y = nonzero(y)?;
                        let r = x.checked_rem(y).ok_or_else(overflow)?;
                        Ok(if r != 0 && (r < 0) != (y < 0) { r + y } else { r })
                    }
                    "div" => {
                        let y = nonzero(y)?;
                        let q = x.checked_div(y).ok_or_else(overflow)?;
                        Ok(if (x % y != 0) && ((x < 0) != (y < 0)) { q - 1 } else { q })
                    }
                    "min" => Ok(x.min(y)),
                    "max" => Ok(x.max(y)),
                    "**" | "^" => pow(x, y),
                    ">>" => shift(x, y, false),
                    "<<" => shift(x, y, true),
                    "/\\" => Ok(x & y),
                    "\\/" => Ok(x | y),
                    "xor" => Ok(x ^ y),
                    "gcd" => {
                        let (mut a, mut b) = (x.unsigned_abs(), y.unsigned_abs());
                        while b != 0 {
                            (a, b) = (b, a % b);
                        }
                        i64::try_from(a).map_err(|_| overflow())
                    }
                    "truncate" => Ok(x),
                    _ => Err(EngineError::type_error("evaluable", &t)),
                };
            }
            Err(EngineError::type_error("evaluable", &t))
        }
    }
}
