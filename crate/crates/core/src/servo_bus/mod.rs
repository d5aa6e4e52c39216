//! One-wire servo bus: frame codec, register map, and the simulated devices.

pub mod codec;
pub mod log;
pub mod registers;
pub mod sim;

pub use codec::{
    checksum, decode, decode_status, encode, encode_status, BusPacket, DecodeError, EncodeError, Instruction,
    StatusPacket, BROADCAST_ID, IMU_BOARD_ID,
};
pub use log::{read_log, LoggedFrame, PacketLog};
pub use sim::{BusError, ImuReading, SimBus};
