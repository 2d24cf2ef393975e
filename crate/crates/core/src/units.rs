use core::f64::consts::PI;

pub fn rpm_to_rad_s(rpm: f64) -> f64 {
    rpm * (2.0 * PI / 60.0)
}

pub fn rad_s_to_rpm(rad_s: f64) -> f64 {
    rad_s * (60.0 / (2.0 * PI))
}

pub fn m_to_mm(m: f64) -> f64 {
    m * 1000.0
}

pub fn mm_to_m(mm: f64) -> f64 {
    mm / 1000.0
}
