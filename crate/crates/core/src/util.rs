//! Small internal helpers shared across modules.

/// SplitMix64 finalizer; used to derive well-spread child seeds from
/// (seed, index) pairs so that streams are independent of execution order.
pub(crate) fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}
