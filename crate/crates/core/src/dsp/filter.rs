use crate::dsp::IirFilter;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Causal cascade application, direct form II transposed, zero initial state.
pub fn filter_signal<T: Scalar>(filter: &IirFilter, samples: &[T]) -> Result<Vec<T>> {
    if samples.is_empty() {
        return Err(Error::domain("cannot filter an empty sequence"));
    }
    let mut out = samples.to_vec();
    filter_in_place(filter, &mut out);
    Ok(out)
}

pub fn filter_in_place<T: Scalar>(filter: &IirFilter, samples: &mut [T]) {
    for s in &filter.sections {
        let (b0, b1, b2) = (T::of(s.b0), T::of(s.b1), T::of(s.b2));
        let (a1, a2) = (T::of(s.a1), T::of(s.a2));
        let (mut z1, mut z2) = (T::zero(), T::zero());
        for x in samples.iter_mut() {
            let input = *x;
            let y = b0 * input + z1;
            z1 = b1 * input - a1 * y + z2;
            z2 = b2 * input - a2 * y;
            *x = y;
        }
    }
}

/// Forward then time-reversed pass. Squares the magnitude response and cancels the
/// phase; no edge padding is applied.
pub fn filter_zero_phase<T: Scalar>(filter: &IirFilter, samples: &[T]) -> Result<Vec<T>> {
    let mut out = filter_signal(filter, samples)?;
    out.reverse();
    filter_in_place(filter, &mut out);
    out.reverse();
    Ok(out)
}
