//! Printed reference values used by the comparison tables.

use balance_core::ObjectiveKind;

/// One row of a performance table: rise s, settling s, overshoot %, ISE, int U, int F.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerfRow {
    pub method: &'static str,
    pub rise: f64,
    pub settling: f64,
    pub overshoot: f64,
    pub ise: f64,
    pub int_u: f64,
    pub int_f: f64,
}

const fn row(method: &'static str, v: [f64; 6]) -> PerfRow {
    PerfRow {
        method,
        rise: v[0],
        settling: v[1],
        overshoot: v[2],
        ise: v[3],
        int_u: v[4],
        int_f: v[5],
    }
}

pub const PRASAD: &str = "PID (Prasad)";

/// PID-only rows, baseline first, then the tuned variants.
pub const PID_ROWS: [PerfRow; 5] = [
    row(PRASAD, [4.8914, 9.6098, 0.0, 0.72255, 800.1996, 79.5381]),
    row("PID (ISE)", [0.8900, 3.3351, 3.4130, 0.4558, 686.3625, 67.2464]),
    row("PID (ISE-ST)", [1.0120, 1.8747, 1.7828, 0.4709, 674.2809, 66.3176]),
    row("PID (ISE-OS)", [1.3283, 3.8942, 0.0, 0.5093, 662.3581, 65.4674]),
    row("PID (ISE-AB)", [1.0578, 1.9593, 1.2077, 0.4751, 665.5093, 65.5258]),
];

/// Combined-structure rows: baseline with LQR, then each tuned variant with the network.
pub const COMBINED_ROWS: [PerfRow; 5] = [
    row("PID + LQR (Prasad)", [3.2407, 6.1969, 0.0, 1.1437, 1207.6, 120.5957]),
    row("PID (ISE) + NN", [0.9546, 3.3273, 0.6194, 0.4576, 672.7276, 65.8731]),
    row("PID (ISE-ST) + NN", [1.1275, 3.5240, 0.1413, 0.4733, 661.1241, 65.0051]),
    row("PID (ISE-OS) + NN", [2.0745, 4.3102, 0.0, 0.5199, 659.5133, 65.1875]),
    row("PID (ISE-AB) + NN", [1.2055, 3.4214, 0.0103, 0.4790, 654.4692, 64.4231]),
];

/// Order of the tuned variants in Tables 4, 5 and 7.
pub const VARIANTS: [ObjectiveKind; 4] = [
    ObjectiveKind::Ise,
    ObjectiveKind::IseSt,
    ObjectiveKind::IseOs,
    ObjectiveKind::IseAb,
];

/// Gain rows: kp_theta, ki_theta, kd_theta, kp_x, ki_x, kd_x.
pub const GAIN_ROWS: [(&str, [f64; 6]); 5] = [
    (PRASAD, [-40.0, 0.0, -8.0, -1.0, 0.0, -3.0]),
    ("ISE", [-43.9238, 1.2625, -6.1163, -2.8623, -0.0017, -3.5402]),
    ("ISE-ST", [-43.6806, 0.8948, -6.2171, -2.5071, -0.0279, -3.2817]),
    ("ISE-OS", [-42.3380, -1.2595, -6.1730, -1.8106, 0.0, -2.6507]),
    ("ISE-AB", [-43.8129, 0.2949, -6.0142, -2.3795, 0.0, -3.1028]),
];

/// Quantity reported in a tuning-outcome row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Rise,
    Settling,
    Overshoot,
    Ise,
    /// The tuning objective itself.
    Objective(ObjectiveKind),
}

impl Quantity {
    pub fn label(self) -> &'static str {
        match self {
            Quantity::Rise => "rise_time",
            Quantity::Settling => "settling_time",
            Quantity::Overshoot => "overshoot",
            Quantity::Ise => "ISE",
            Quantity::Objective(k) => k.name(),
        }
    }
}

/// Tuning outcomes over the runs: (objective, quantity, min, max).
pub const TUNING_RANGES: [(ObjectiveKind, Quantity, f64, f64); 19] = {
    use ObjectiveKind as K;
    use Quantity as Q;
    [
        (K::Ise, Q::Rise, 0.8122, 0.9149),
        (K::Ise, Q::Settling, 3.3351, 5.0759),
        (K::Ise, Q::Overshoot, 1.4904, 6.7221),
        (K::Ise, Q::Ise, 0.4558, 0.4658),
        (K::IseAb, Q::Rise, 0.9532, 1.3752),
        (K::IseAb, Q::Settling, 1.8481, 3.6533),
        (K::IseAb, Q::Overshoot, 0.3550, 3.1481),
        (K::IseAb, Q::Ise, 0.4660, 0.5347),
        (K::IseAb, Q::Objective(K::IseAb), 3.5746, 4.0468),
        (K::IseSt, Q::Rise, 1.0120, 1.6997),
        (K::IseSt, Q::Settling, 1.8747, 2.8462),
        (K::IseSt, Q::Overshoot, 1.2320, 1.9231),
        (K::IseSt, Q::Ise, 0.4709, 0.5979),
        (K::IseSt, Q::Objective(K::IseSt), 0.6583, 0.8825),
        (K::IseOs, Q::Rise, 1.1723, 1.5896),
        (K::IseOs, Q::Settling, 3.5311, 5.5525),
        (K::IseOs, Q::Overshoot, 0.0, 0.1948),
        (K::IseOs, Q::Ise, 0.4735, 0.5724),
        (K::IseOs, Q::Objective(K::IseOs), 0.4753, 0.5735),
    ]
};

pub const LQR_K: [f64; 4] = [-137.7896, -25.9783, -22.3607, -27.5768];
