//! Register map of the simulated devices.

pub const REGISTER_COUNT: usize = 74;

pub const MODEL_NUMBER: u8 = 0;
pub const FIRMWARE_VERSION: u8 = 2;
pub const ID: u8 = 3;
pub const TORQUE_ENABLE: u8 = 24;
pub const LED: u8 = 25;
pub const GOAL_POSITION: u8 = 30;
pub const MOVING_SPEED: u8 = 32;
pub const TORQUE_LIMIT: u8 = 34;
pub const PRESENT_POSITION: u8 = 36;
pub const PRESENT_SPEED: u8 = 38;
pub const PRESENT_LOAD: u8 = 40;
pub const PRESENT_VOLTAGE: u8 = 42;
pub const PRESENT_TEMP: u8 = 43;

/// Registers of the IMU and power board.
pub mod imu {
    pub const GYRO_XYZ: u8 = 38;
    pub const ACCEL_XYZ: u8 = 44;
    pub const VOLTAGE: u8 = 50;
}

/// MX-106 model number.
pub const SERVO_MODEL: u16 = 320;
/// CM730 model number.
pub const BOARD_MODEL: u16 = 0x7300;

/// Present-speed resolution of the MX series, rad/s per unit (0.114 rpm).
pub const SPEED_UNIT_RAD_S: f64 = 0.114 * 2.0 * std::f64::consts::PI / 60.0;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegisterFile {
    bytes: [u8; REGISTER_COUNT],
    writable: std::ops::Range<usize>,
}

impl RegisterFile {
    pub fn new(writable: std::ops::Range<usize>) -> Self {
        RegisterFile { bytes: [0; REGISTER_COUNT], writable }
    }

    pub fn in_map(addr: u8, len: usize) -> bool {
        len > 0 && addr as usize + len <= REGISTER_COUNT
    }

    pub fn read(&self, addr: u8, len: usize) -> Option<&[u8]> {
        Self::in_map(addr, len).then(|| &self.bytes[addr as usize..addr as usize + len])
    }

    pub fn can_write(&self, addr: u8, len: usize) -> bool {
        Self::in_map(addr, len)
            && self.writable.start <= addr as usize
            && addr as usize + len <= self.writable.end
    }

    /// Host-side write honoring the writable window.
    pub fn write(&mut self, addr: u8, data: &[u8]) -> bool {
        if !self.can_write(addr, data.len()) {
            return false;
        }
        self.bytes[addr as usize..addr as usize + data.len()].copy_from_slice(data);
        true
    }

    /// Device-side update of any register, including read-only ones.
    pub fn set_u8(&mut self, addr: u8, v: u8) {
        self.bytes[addr as usize] = v;
    }

    pub fn set_u16(&mut self, addr: u8, v: u16) {
        self.bytes[addr as usize..addr as usize + 2].copy_from_slice(&v.to_le_bytes());
    }

    pub fn set_i16(&mut self, addr: u8, v: i16) {
        self.bytes[addr as usize..addr as usize + 2].copy_from_slice(&v.to_le_bytes());
    }

    pub fn u8_at(&self, addr: u8) -> u8 {
        self.bytes[addr as usize]
    }

    pub fn u16_at(&self, addr: u8) -> u16 {
        u16::from_le_bytes([self.bytes[addr as usize], self.bytes[addr as usize + 1]])
    }

    pub fn i16_at(&self, addr: u8) -> i16 {
        self.u16_at(addr) as i16
    }

    pub fn as_bytes(&self) -> &[u8; REGISTER_COUNT] {
        &self.bytes
    }
}

/// MX sign-magnitude encoding: bit 10 set for the negative direction.
pub fn encode_signed_magnitude(value: f64, unit: f64) -> u16 {
    let mag = (value.abs() / unit).round().min(1023.0) as u16;
    if value < 0.0 && mag > 0 {
        mag | 0x400
    } else {
        mag
    }
}

pub fn decode_signed_magnitude(raw: u16, unit: f64) -> f64 {
    let mag = (raw & 0x3FF) as f64 * unit;
    if raw & 0x400 != 0 {
        -mag
    } else {
        mag
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn little_endian_words() {
        let mut r = RegisterFile::new(24..36);
        r.set_u16(PRESENT_POSITION, 0x0800);
        assert_eq!(r.read(PRESENT_POSITION, 2).unwrap(), &[0x00, 0x08]);
        assert_eq!(r.u16_at(PRESENT_POSITION), 2048);
        r.set_i16(imu::GYRO_XYZ, -2);
        assert_eq!(r.i16_at(imu::GYRO_XYZ), -2);
    }

    #[test]
    fn map_bounds() {
        let mut r = RegisterFile::new(24..36);
        assert!(r.read(73, 1).is_some());
        assert!(r.read(73, 2).is_none());
        assert!(r.read(74, 1).is_none());
        assert!(r.write(GOAL_POSITION, &[0, 8]));
        assert!(!r.write(PRESENT_POSITION, &[0, 8]));
        assert!(!r.write(35, &[0, 0]));
    }

    #[test]
    fn signed_magnitude() {
        assert_eq!(encode_signed_magnitude(-3.0, 1.0), 0x403);
        assert_eq!(decode_signed_magnitude(0x403, 1.0), -3.0);
        assert_eq!(encode_signed_magnitude(5000.0, 1.0), 1023);
    }
}
