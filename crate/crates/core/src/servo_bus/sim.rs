//! Simulated one-wire bus: 20 servos plus the IMU/power board.
//!
//! Every transaction goes through the wire codec in both directions, so
//! corruption injection and packet logging see real frames.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::codec::{
    decode, decode_status, encode, encode_status, error_flags, BusPacket, DecodeError, Instruction, StatusPacket,
    BROADCAST_ID, IMU_BOARD_ID,
};
use super::log::PacketLog;
use super::registers::{self, imu, RegisterFile};
use crate::actuator::{goal_ticks_to_rad, step_servo, ServoDynamicsParams, ServoState, Travel};
use crate::robot_model::{rad_to_ticks, JointId, JointLimits, JointVector, JOINT_COUNT};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BusError {
    #[error("device {0} did not answer")]
    DeviceTimeout(u8),
    #[error("response from device {0} was corrupted")]
    CorruptResponse(u8),
    #[error("instruction {0:?} cannot be broadcast")]
    InvalidBroadcast(Instruction),
    #[error(transparent)]
    Encode(#[from] super::codec::EncodeError),
}

/// Inertial readings as the board reports them, in SI units.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ImuReading {
    pub gyro: [f64; 3],
    pub accel: [f64; 3],
    pub voltage: f64,
}

#[derive(Clone, Debug)]
pub struct SimServo {
    pub regs: RegisterFile,
    pub state: ServoState,
    pub params: ServoDynamicsParams,
    pub travel: Travel,
}

impl SimServo {
    fn new(id: u8, position: f64, params: ServoDynamicsParams, travel: Travel) -> Self {
        let mut regs = RegisterFile::new(24..36);
        regs.set_u16(registers::MODEL_NUMBER, registers::SERVO_MODEL);
        regs.set_u8(registers::FIRMWARE_VERSION, 36);
        regs.set_u8(registers::ID, id);
        regs.set_u8(registers::TORQUE_ENABLE, 1);
        regs.set_u16(registers::TORQUE_LIMIT, 1023);
        regs.set_u8(registers::PRESENT_TEMP, 40);
        let mut s = SimServo { regs, state: ServoState::at(position), params, travel };
        let ticks = rad_to_ticks(position).unwrap_or(2048);
        s.regs.set_u16(registers::GOAL_POSITION, ticks);
        s.refresh_present(0.0);
        s
    }

    pub fn torque_enabled(&self) -> bool {
        self.regs.u8_at(registers::TORQUE_ENABLE) != 0
    }

    pub fn goal_ticks(&self) -> u16 {
        self.regs.u16_at(registers::GOAL_POSITION) & 0x0FFF
    }

    fn step(&mut self, external_torque: f64, dt: f64) {
        let params = if self.torque_enabled() {
            self.params
        } else {
            ServoDynamicsParams { stiffness: 0.0, ..self.params }
        };
        self.state = step_servo(self.state, self.goal_ticks(), external_torque, dt, &params, self.travel);
    }

    fn refresh_present(&mut self, battery_v: f64) {
        let ticks = rad_to_ticks(self.state.position).unwrap_or(2048);
        self.regs.set_u16(registers::PRESENT_POSITION, ticks);
        let speed = registers::encode_signed_magnitude(self.state.velocity, registers::SPEED_UNIT_RAD_S);
        self.regs.set_u16(registers::PRESENT_SPEED, speed);
        let load_unit = self.params.torque_max / 1023.0;
        let load = registers::encode_signed_magnitude(self.state.motor_torque, load_unit);
        self.regs.set_u16(registers::PRESENT_LOAD, load);
        self.regs.set_u8(registers::PRESENT_VOLTAGE, (battery_v * 10.0).round().clamp(0.0, 255.0) as u8);
    }
}

#[derive(Clone, Debug)]
pub struct ImuBoard {
    pub regs: RegisterFile,
}

impl ImuBoard {
    fn new() -> Self {
        let mut regs = RegisterFile::new(24..38);
        regs.set_u16(registers::MODEL_NUMBER, registers::BOARD_MODEL);
        regs.set_u8(registers::ID, IMU_BOARD_ID);
        ImuBoard { regs }
    }

    fn set_reading(&mut self, r: &ImuReading) {
        let to_raw = |v: f64| (v * 1000.0).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16;
        for axis in 0..3 {
            self.regs.set_i16(imu::GYRO_XYZ + 2 * axis as u8, to_raw(r.gyro[axis]));
            self.regs.set_i16(imu::ACCEL_XYZ + 2 * axis as u8, to_raw(r.accel[axis]));
        }
        self.regs.set_u8(imu::VOLTAGE, (r.voltage * 10.0).round().clamp(0.0, 255.0) as u8);
    }
}

/// Decode the IMU register block starting at `imu::GYRO_XYZ` (13 bytes).
pub fn parse_imu_block(bytes: &[u8]) -> Option<ImuReading> {
    if bytes.len() < 13 {
        return None;
    }
    let word = |i: usize| i16::from_le_bytes([bytes[i], bytes[i + 1]]) as f64 / 1000.0;
    Some(ImuReading {
        gyro: [word(0), word(2), word(4)],
        accel: [word(6), word(8), word(10)],
        voltage: bytes[12] as f64 / 10.0,
    })
}

pub const IMU_BLOCK_LEN: u8 = 13;

pub struct SimBus {
    servos: Vec<SimServo>,
    board: ImuBoard,
    corrupt_rate: f64,
    rng: ChaCha8Rng,
    now_us: u64,
    battery_v: f64,
    log: Option<PacketLog>,
}

enum Reply {
    None,
    One(StatusPacket),
    Many(Vec<StatusPacket>),
}

impl SimBus {
    pub fn new(
        initial: &JointVector,
        params: ServoDynamicsParams,
        limits: &JointLimits,
        corrupt_rate: f64,
        seed: u64,
    ) -> Self {
        let servos = JointId::all()
            .map(|j| {
                let travel = Travel { lo: limits.lo[j], hi: limits.hi[j] };
                SimServo::new(j.bus_id(), initial[j], params, travel)
            })
            .collect();
        SimBus {
            servos,
            board: ImuBoard::new(),
            corrupt_rate,
            rng: ChaCha8Rng::seed_from_u64(seed),
            now_us: 0,
            battery_v: 0.0,
            log: None,
        }
    }

    pub fn with_log(mut self, log: PacketLog) -> Self {
        self.log = Some(log);
        self
    }

    pub fn take_log(&mut self) -> Option<PacketLog> {
        self.log.take()
    }

    pub fn set_time_us(&mut self, now_us: u64) {
        self.now_us = now_us;
    }

    pub fn set_corrupt_rate(&mut self, rate: f64) {
        self.corrupt_rate = rate.clamp(0.0, 1.0);
    }

    pub fn set_servo_params(&mut self, params: ServoDynamicsParams) {
        for s in &mut self.servos {
            s.params = params;
        }
    }

    pub fn servo(&self, id: u8) -> Option<&SimServo> {
        self.servos.get((id as usize).wrapping_sub(1))
    }

    pub fn servo_mut(&mut self, id: u8) -> Option<&mut SimServo> {
        self.servos.get_mut((id as usize).wrapping_sub(1))
    }

    pub fn board(&self) -> &ImuBoard {
        &self.board
    }

    pub fn positions(&self) -> JointVector {
        let mut q = JointVector::ZERO;
        for (k, s) in self.servos.iter().enumerate() {
            q.0[k] = s.state.position;
        }
        q
    }

    pub fn velocities(&self) -> JointVector {
        let mut q = JointVector::ZERO;
        for (k, s) in self.servos.iter().enumerate() {
            q.0[k] = s.state.velocity;
        }
        q
    }

    /// Place every servo at rest at `q` (simulator reset, not a bus operation).
    pub fn reset_positions(&mut self, q: &JointVector) {
        for (k, s) in self.servos.iter_mut().enumerate() {
            s.state = ServoState::at(q.0[k].clamp(s.travel.lo, s.travel.hi));
        }
        self.refresh(self.battery_v);
    }

    /// Integrate every servo by `dt` under the given external torques.
    pub fn step(&mut self, external: &JointVector, dt: f64) {
        for (k, s) in self.servos.iter_mut().enumerate() {
            s.step(external.0[k], dt);
        }
        self.refresh(self.battery_v);
    }

    pub fn set_imu(&mut self, reading: ImuReading) {
        self.battery_v = reading.voltage;
        self.board.set_reading(&reading);
        self.refresh(reading.voltage);
    }

    fn refresh(&mut self, battery_v: f64) {
        for s in &mut self.servos {
            s.refresh_present(battery_v);
        }
    }

    fn corrupt(&mut self, bytes: &mut [u8]) {
        if self.corrupt_rate <= 0.0 {
            return;
        }
        for b in bytes.iter_mut() {
            if self.rng.gen_bool(self.corrupt_rate) {
                *b ^= self.rng.gen_range(1..=255u8);
            }
        }
    }

    fn log_frame(&mut self, bytes: &[u8]) {
        if let Some(log) = self.log.as_mut() {
            log.record(self.now_us, bytes);
        }
    }

    fn registers_mut(&mut self, id: u8) -> Option<&mut RegisterFile> {
        if id == IMU_BOARD_ID {
            Some(&mut self.board.regs)
        } else {
            self.servo_mut(id).map(|s| &mut s.regs)
        }
    }

    fn registers(&self, id: u8) -> Option<&RegisterFile> {
        if id == IMU_BOARD_ID {
            Some(&self.board.regs)
        } else {
            self.servo(id).map(|s| &s.regs)
        }
    }

    fn device_ids(&self) -> impl Iterator<Item = u8> {
        (1..=JOINT_COUNT as u8).chain(std::iter::once(IMU_BOARD_ID))
    }

    /// Send one instruction packet and collect the status replies.
    pub fn transact(&mut self, packet: &BusPacket) -> Result<Vec<StatusPacket>, BusError> {
        let mut wire = encode(packet)?;
        self.corrupt(&mut wire);
        self.log_frame(&wire);
        let received = match decode(&wire) {
            Ok((p, _)) => p,
            Err(_) => {
                // nobody accepts a damaged frame
                return if packet.id == BROADCAST_ID { Ok(vec![]) } else { Err(BusError::DeviceTimeout(packet.id)) };
            }
        };
        match self.execute(&received)? {
            Reply::None => Ok(vec![]),
            Reply::One(s) => Ok(vec![self.send_back(s)?]),
            Reply::Many(v) => v.into_iter().map(|s| self.send_back(s)).collect(),
        }
    }

    fn send_back(&mut self, status: StatusPacket) -> Result<StatusPacket, BusError> {
        let id = status.id;
        let mut wire = encode_status(&status)?;
        self.corrupt(&mut wire);
        self.log_frame(&wire);
        match decode_status(&wire) {
            Ok((s, _)) => Ok(s),
            Err(DecodeError::NeedMoreData { .. }) => Err(BusError::DeviceTimeout(id)),
            Err(_) => Err(BusError::CorruptResponse(id)),
        }
    }

    fn exists(&self, id: u8) -> bool {
        self.registers(id).is_some()
    }

    fn execute(&mut self, p: &BusPacket) -> Result<Reply, BusError> {
        let broadcast = p.id == BROADCAST_ID;
        if !broadcast && !self.exists(p.id) {
            return Err(BusError::DeviceTimeout(p.id));
        }
        let status = |id: u8, flags: u8, params: Vec<u8>| StatusPacket { id, error_flags: flags, params };
        match p.instruction {
            Instruction::Ping => {
                if broadcast {
                    return Err(BusError::InvalidBroadcast(p.instruction));
                }
                Ok(Reply::One(status(p.id, 0, vec![])))
            }
            Instruction::Read => {
                if broadcast {
                    return Err(BusError::InvalidBroadcast(p.instruction));
                }
                let [addr, len] = p.params[..] else {
                    return Ok(Reply::One(status(p.id, error_flags::INSTRUCTION, vec![])));
                };
                let regs = self.registers(p.id).expect("checked above");
                Ok(Reply::One(match regs.read(addr, len as usize) {
                    Some(bytes) => status(p.id, 0, bytes.to_vec()),
                    None => status(p.id, error_flags::RANGE, vec![]),
                }))
            }
            Instruction::Write => {
                let Some((&addr, data)) = p.params.split_first() else {
                    return Ok(if broadcast {
                        Reply::None
                    } else {
                        Reply::One(status(p.id, error_flags::INSTRUCTION, vec![]))
                    });
                };
                if broadcast {
                    let ids: Vec<u8> = self.device_ids().collect();
                    for id in ids {
                        self.registers_mut(id).expect("listed device").write(addr, data);
                    }
                    return Ok(Reply::None);
                }
                let ok = self.registers_mut(p.id).expect("checked above").write(addr, data);
                Ok(Reply::One(status(p.id, if ok { 0 } else { error_flags::RANGE }, vec![])))
            }
            Instruction::SyncWrite => {
                let groups = parse_sync_write(&p.params);
                if let Some((addr, groups)) = groups {
                    for (id, data) in groups {
                        if let Some(regs) = self.registers_mut(id) {
                            regs.write(addr, data);
                        }
                    }
                }
                Ok(Reply::None)
            }
            Instruction::BulkRead => {
                let Some(requests) = parse_bulk_read(&p.params) else {
                    return Ok(Reply::None);
                };
                let mut out = Vec::with_capacity(requests.len());
                for (id, addr, len) in requests {
                    let regs = self.registers(id).ok_or(BusError::DeviceTimeout(id))?;
                    out.push(match regs.read(addr, len as usize) {
                        Some(bytes) => status(id, 0, bytes.to_vec()),
                        None => status(id, error_flags::RANGE, vec![]),
                    });
                }
                Ok(Reply::Many(out))
            }
        }
    }
}

/// `[addr, len, (id, data[len])*]`; returns None when the groups are ragged.
pub fn parse_sync_write(params: &[u8]) -> Option<(u8, Vec<(u8, &[u8])>)> {
    let (&addr, rest) = params.split_first()?;
    let (&len, rest) = rest.split_first()?;
    let stride = len as usize + 1;
    if len == 0 || rest.len() % stride != 0 {
        return None;
    }
    Some((addr, rest.chunks(stride).map(|c| (c[0], &c[1..])).collect()))
}

/// `[0x00, (len, id, addr)*]`.
pub fn parse_bulk_read(params: &[u8]) -> Option<Vec<(u8, u8, u8)>> {
    let (_, rest) = params.split_first()?;
    if rest.len() % 3 != 0 {
        return None;
    }
    Some(rest.chunks(3).map(|c| (c[1], c[2], c[0])).collect())
}

pub fn sync_write_packet(addr: u8, len: u8, groups: &[(u8, Vec<u8>)]) -> BusPacket {
    let mut params = vec![addr, len];
    for (id, data) in groups {
        params.push(*id);
        params.extend_from_slice(data);
    }
    BusPacket { id: BROADCAST_ID, instruction: Instruction::SyncWrite, params }
}

pub fn bulk_read_packet(requests: &[(u8, u8, u8)]) -> BusPacket {
    let mut params = vec![0x00];
    for (id, addr, len) in requests {
        params.extend_from_slice(&[*len, *id, *addr]);
    }
    BusPacket { id: BROADCAST_ID, instruction: Instruction::BulkRead, params }
}

pub fn goal_positions_packet(targets: &JointVector) -> BusPacket {
    let groups: Vec<(u8, Vec<u8>)> = JointId::all()
        .map(|j| (j.bus_id(), rad_to_ticks(targets[j]).unwrap_or(2048).to_le_bytes().to_vec()))
        .collect();
    sync_write_packet(registers::GOAL_POSITION, 2, &groups)
}

pub fn torque_enable_packet(enable: bool) -> BusPacket {
    BusPacket { id: BROADCAST_ID, instruction: Instruction::Write, params: vec![registers::TORQUE_ENABLE, enable as u8] }
}

/// Bulk read of every servo position plus the IMU block.
pub fn sensor_read_packet() -> BusPacket {
    let mut requests: Vec<(u8, u8, u8)> = JointId::all().map(|j| (j.bus_id(), registers::PRESENT_POSITION, 2)).collect();
    requests.push((IMU_BOARD_ID, imu::GYRO_XYZ, IMU_BLOCK_LEN));
    bulk_read_packet(&requests)
}

/// Convert a sensor bulk-read reply into joint positions and an IMU reading.
pub fn parse_sensor_reply(replies: &[StatusPacket]) -> Option<(JointVector, ImuReading)> {
    let mut q = JointVector::ZERO;
    let mut imu = None;
    let mut seen = 0;
    for s in replies {
        if s.error_flags & error_flags::RANGE != 0 {
            return None;
        }
        if s.id == IMU_BOARD_ID {
            imu = parse_imu_block(&s.params);
        } else if let Some(j) = JointId::from_bus_id(s.id) {
            let [lo, hi] = s.params[..] else { return None };
            q[j] = goal_ticks_to_rad(u16::from_le_bytes([lo, hi]));
            seen += 1;
        }
    }
    (seen == JOINT_COUNT).then_some(())?;
    Some((q, imu?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bus() -> SimBus {
        SimBus::new(&JointVector::ZERO, ServoDynamicsParams::default(), &JointLimits::default(), 0.0, 7)
    }

    fn read(id: u8, addr: u8, len: u8) -> BusPacket {
        BusPacket { id, instruction: Instruction::Read, params: vec![addr, len] }
    }

    #[test]
    fn write_then_settle_then_read() {
        let mut b = bus();
        let w = BusPacket { id: 3, instruction: Instruction::Write, params: vec![registers::GOAL_POSITION, 0x00, 0x08] };
        let st = b.transact(&w).unwrap();
        assert_eq!(st, vec![StatusPacket { id: 3, error_flags: 0, params: vec![] }]);
        for _ in 0..500 {
            b.step(&JointVector::ZERO, 0.008);
        }
        let r = b.transact(&read(3, registers::PRESENT_POSITION, 2)).unwrap();
        let ticks = u16::from_le_bytes([r[0].params[0], r[0].params[1]]) as i32;
        assert!((ticks - 2048).abs() <= 2, "{ticks}");
    }

    #[test]
    fn moves_to_a_new_goal() {
        let mut b = SimBus::new(
            &JointVector::ZERO,
            ServoDynamicsParams { coulomb: 0.0, ..Default::default() },
            &JointLimits::default(),
            0.0,
            1,
        );
        let goal: u16 = 2500;
        let mut params = vec![registers::GOAL_POSITION];
        params.extend_from_slice(&goal.to_le_bytes());
        b.transact(&BusPacket { id: 3, instruction: Instruction::Write, params }).unwrap();
        for _ in 0..1000 {
            b.step(&JointVector::ZERO, 0.008);
        }
        let r = b.transact(&read(3, registers::PRESENT_POSITION, 2)).unwrap();
        let ticks = u16::from_le_bytes([r[0].params[0], r[0].params[1]]) as i32;
        assert!((ticks - 2500).abs() <= 2, "{ticks}");
    }

    #[test]
    fn absent_device_times_out() {
        let mut b = bus();
        let ping = BusPacket { id: 21, instruction: Instruction::Ping, params: vec![] };
        assert_eq!(b.transact(&ping), Err(BusError::DeviceTimeout(21)));
        let ping = BusPacket { id: 200, instruction: Instruction::Ping, params: vec![] };
        assert_eq!(b.transact(&ping).unwrap().len(), 1);
    }

    #[test]
    fn bulk_read_preserves_request_order() {
        let mut b = bus();
        let p = bulk_read_packet(&[(2, registers::PRESENT_POSITION, 2), (1, registers::PRESENT_POSITION, 2)]);
        let st = b.transact(&p).unwrap();
        assert_eq!(st.iter().map(|s| s.id).collect::<Vec<_>>(), vec![2, 1]);
        let p = bulk_read_packet(&[(1, registers::PRESENT_POSITION, 2), (2, registers::PRESENT_POSITION, 2)]);
        let st = b.transact(&p).unwrap();
        assert_eq!(st.iter().map(|s| s.id).collect::<Vec<_>>(), vec![1, 2]);
        assert!(st.iter().all(|s| s.params == vec![0x00, 0x08]));
    }

    #[test]
    fn invalid_address_sets_range_flag() {
        let mut b = bus();
        let st = b.transact(&read(1, 73, 2)).unwrap();
        assert_eq!(st[0].error_flags, error_flags::RANGE);
        let w = BusPacket { id: 1, instruction: Instruction::Write, params: vec![registers::PRESENT_POSITION, 1, 1] };
        assert_eq!(b.transact(&w).unwrap()[0].error_flags, error_flags::RANGE);
    }

    #[test]
    fn broadcast_write_is_silent_and_reaches_everyone() {
        let mut b = bus();
        assert!(b.transact(&torque_enable_packet(false)).unwrap().is_empty());
        for id in 1..=20 {
            assert!(!b.servo(id).unwrap().torque_enabled());
        }
    }

    #[test]
    fn sync_write_updates_goals_silently() {
        let mut b = bus();
        let mut q = JointVector::ZERO;
        q[JointId::RIGHT_KNEE_PITCH] = 0.5;
        assert!(b.transact(&goal_positions_packet(&q)).unwrap().is_empty());
        let id = JointId::RIGHT_KNEE_PITCH.bus_id();
        assert_eq!(b.servo(id).unwrap().goal_ticks(), rad_to_ticks(0.5).unwrap());
    }

    #[test]
    fn imu_block_round_trip() {
        let mut b = bus();
        let r = ImuReading { gyro: [0.1, -0.2, 0.003], accel: [0.0, 1.5, 9.81], voltage: 15.3 };
        b.set_imu(r);
        let replies = b.transact(&sensor_read_packet()).unwrap();
        assert_eq!(replies.len(), 21);
        let (q, got) = parse_sensor_reply(&replies).unwrap();
        assert_eq!(q, JointVector::ZERO);
        for k in 0..3 {
            assert!((got.gyro[k] - r.gyro[k]).abs() <= 0.0005);
            assert!((got.accel[k] - r.accel[k]).abs() <= 0.0005);
        }
        assert!((got.voltage - 15.3).abs() < 1e-9);
        assert_eq!(b.servo(1).unwrap().regs.u8_at(registers::PRESENT_VOLTAGE), 153);
    }

    #[test]
    fn corruption_causes_timeouts_not_bad_data() {
        let mut b = SimBus::new(&JointVector::ZERO, ServoDynamicsParams::default(), &JointLimits::default(), 0.05, 3);
        let mut failures = 0;
        for _ in 0..200 {
            match b.transact(&read(4, registers::PRESENT_POSITION, 2)) {
                Ok(st) => assert_eq!(st[0].params, vec![0x00, 0x08]),
                Err(_) => failures += 1,
            }
        }
        assert!(failures > 0);
    }

    proptest! {
        #[test]
        fn sync_write_equals_individual_writes(
            goals in proptest::collection::btree_map(1u8..=20, 0u16..4096, 1..20)
        ) {
            let mut a = bus();
            let mut b = bus();
            let groups: Vec<(u8, Vec<u8>)> = goals.iter().map(|(id, g)| (*id, g.to_le_bytes().to_vec())).collect();
            a.transact(&sync_write_packet(registers::GOAL_POSITION, 2, &groups)).unwrap();
            for (id, data) in &groups {
                let mut params = vec![registers::GOAL_POSITION];
                params.extend_from_slice(data);
                b.transact(&BusPacket { id: *id, instruction: Instruction::Write, params }).unwrap();
            }
            for id in 1..=20u8 {
                prop_assert_eq!(a.servo(id).unwrap().regs.as_bytes(), b.servo(id).unwrap().regs.as_bytes());
            }
        }
    }
}
