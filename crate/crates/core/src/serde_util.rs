//! JSON has no infinity literal; infinite values are written as `"inf"`.

use serde::Serializer;

pub fn real_or_inf<S: Serializer>(x: &f64, ser: S) -> Result<S::Ok, S::Error> {
    if x.is_finite() {
        ser.serialize_f64(*x)
    } else if *x > 0.0 {
        ser.serialize_str("inf")
    } else if *x < 0.0 {
        ser.serialize_str("-inf")
    } else {
        ser.serialize_str("nan")
    }
}

pub fn opt_real_or_inf<S: Serializer>(x: &Option<f64>, ser: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(v) => real_or_inf(v, ser),
        None => ser.serialize_none(),
    }
}
