//! Instruction set. Every opcode is one byte followed by a fixed-width,
//! little-endian operand whose shape depends only on the opcode.

use std::fmt;

/// Operand shape of an opcode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Operand {
    None,
    /// u16 frame slot; the top bit selects global memory.
    Slot,
    /// u16 struct field ordinal.
    Field,
    /// u16 constant-pool index.
    Const,
    /// u8 immediate.
    Byte,
    /// i32 offset relative to the next instruction.
    Jump,
    /// u16 routine-table index.
    Routine,
    /// u8 system-call number.
    Sys,
}

impl Operand {
    pub fn width(self) -> usize {
        match self {
            Operand::None => 0,
            Operand::Byte | Operand::Sys => 1,
            Operand::Slot | Operand::Field | Operand::Const | Operand::Routine => 2,
            Operand::Jump => 4,
        }
    }
}

/// Set on a slot operand to address global memory.
pub const GLOBAL_BIT: u16 = 0x8000;

macro_rules! opcodes {
    ($($name:ident = $byte:literal, $text:literal, $operand:ident;)*) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        #[repr(u8)]
        #[allow(non_camel_case_types, clippy::upper_case_acronyms)]
        pub enum Op {
            $($name = $byte,)*
        }

        impl Op {
            pub const ALL: &'static [Op] = &[$(Op::$name,)*];

            pub fn from_byte(b: u8) -> Option<Op> {
                match b {
                    $($byte => Some(Op::$name),)*
                    _ => None,
                }
            }

            pub fn mnemonic(self) -> &'static str {
                match self {
                    $(Op::$name => $text,)*
                }
            }

            pub fn operand(self) -> Operand {
                match self {
                    $(Op::$name => Operand::$operand,)*
                }
            }
        }
    };
}

opcodes! {
    NOP = 0, "NOP", None;
    LDC_I = 1, "LDC_I", Const;
    LDC_R = 2, "LDC_R", Const;
    LDC_B = 3, "LDC_B", Byte;
    LDC_C = 4, "LDC_C", Byte;
    LDC_S = 5, "LDC_S", Const;
    LDC_AGG = 6, "LDC_AGG", Const;
    LD = 7, "LD", Slot;
    ST = 8, "ST", Slot;
    LD_IDX = 9, "LD_IDX", Slot;
    ST_IDX = 10, "ST_IDX", Slot;
    IDX = 11, "IDX", None;
    LD_FLD = 12, "LD_FLD", Field;
    SET_FLD = 13, "SET_FLD", Field;
    DUP = 14, "DUP", None;
    SWAP = 15, "SWAP", None;
    PICK = 16, "PICK", Byte;
    POP = 17, "POP", None;
    ADD_I = 20, "ADD_I", None;
    SUB_I = 21, "SUB_I", None;
    MUL_I = 22, "MUL_I", None;
    DIV_I = 23, "DIV_I", None;
    NEG_I = 24, "NEG_I", None;
    ADD_R = 25, "ADD_R", None;
    SUB_R = 26, "SUB_R", None;
    MUL_R = 27, "MUL_R", None;
    DIV_R = 28, "DIV_R", None;
    NEG_R = 29, "NEG_R", None;
    I2R = 30, "I2R", None;
    NOT = 31, "NOT", None;
    AND = 32, "AND", None;
    OR = 33, "OR", None;
    EXOR = 34, "EXOR", None;
    CEQ_I = 40, "CEQ_I", None;
    CNE_I = 41, "CNE_I", None;
    CLT_I = 42, "CLT_I", None;
    CLE_I = 43, "CLE_I", None;
    CGT_I = 44, "CGT_I", None;
    CGE_I = 45, "CGE_I", None;
    CEQ_R = 46, "CEQ_R", None;
    CNE_R = 47, "CNE_R", None;
    CLT_R = 48, "CLT_R", None;
    CLE_R = 49, "CLE_R", None;
    CGT_R = 50, "CGT_R", None;
    CGE_R = 51, "CGE_R", None;
    CEQ_C = 52, "CEQ_C", None;
    CNE_C = 53, "CNE_C", None;
    CLT_C = 54, "CLT_C", None;
    CLE_C = 55, "CLE_C", None;
    CGT_C = 56, "CGT_C", None;
    CGE_C = 57, "CGE_C", None;
    CEQ_B = 58, "CEQ_B", None;
    CNE_B = 59, "CNE_B", None;
    JMP = 60, "JMP", Jump;
    JZ = 61, "JZ", Jump;
    JMPG = 62, "JMPG", Jump;
    CALL = 63, "CALL", Routine;
    RET = 64, "RET", None;
    RETV = 65, "RETV", None;
    NORET = 66, "NORET", None;
    POLL = 67, "POLL", None;
    CHKSTEP = 68, "CHKSTEP", None;
    SYS = 69, "SYS", Sys;
}

impl Op {
    pub fn parse(text: &str) -> Option<Op> {
        Op::ALL.iter().copied().find(|op| op.mnemonic() == text)
    }

    /// Encoded size including the opcode byte.
    pub fn size(self) -> usize {
        1 + self.operand().width()
    }

    pub fn is_jump(self) -> bool {
        matches!(self, Op::JMP | Op::JZ | Op::JMPG)
    }

    /// `(required depth, pops, pushes)` for opcodes with a fixed effect.
    /// CALL, SYS and the returns are handled by the verifier.
    pub fn stack_effect(self, operand: u32) -> (usize, usize, usize) {
        use Op::*;
        match self {
            NOP | JMP | JMPG | POLL => (0, 0, 0),
            LDC_I | LDC_R | LDC_B | LDC_C | LDC_S | LDC_AGG | LD => (0, 0, 1),
            ST | POP | JZ => (1, 1, 0),
            LD_IDX | LD_FLD | NEG_I | NEG_R | I2R | NOT | CHKSTEP => (1, 1, 1),
            ST_IDX => (2, 2, 0),
            IDX | SET_FLD => (2, 2, 1),
            DUP => (1, 1, 2),
            SWAP => (2, 2, 2),
            PICK => (operand as usize + 1, 0, 1),
            ADD_I | SUB_I | MUL_I | DIV_I | ADD_R | SUB_R | MUL_R | DIV_R | AND | OR | EXOR
            | CEQ_I | CNE_I | CLT_I | CLE_I | CGT_I | CGE_I | CEQ_R | CNE_R | CLT_R | CLE_R
            | CGT_R | CGE_R | CEQ_C | CNE_C | CLT_C | CLE_C | CGT_C | CGE_C | CEQ_B | CNE_B => {
                (2, 2, 1)
            }
            CALL | RET | RETV | NORET | SYS => unreachable!("variable stack effect"),
        }
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.mnemonic())
    }
}

macro_rules! syscalls {
    ($($name:ident = $n:literal, $text:literal, $pops:literal, $pushes:literal;)*) => {
        /// Runtime services reached through `SYS n`; arguments come from the
        /// operand stack.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        #[repr(u8)]
        #[allow(non_camel_case_types, clippy::upper_case_acronyms)]
        pub enum Sys {
            $($name = $n,)*
        }

        impl Sys {
            pub const ALL: &'static [Sys] = &[$(Sys::$name,)*];

            pub fn from_byte(b: u8) -> Option<Sys> {
                match b {
                    $($n => Some(Sys::$name),)*
                    _ => None,
                }
            }

            pub fn name(self) -> &'static str {
                match self {
                    $(Sys::$name => $text,)*
                }
            }

            /// `(pops, pushes)`.
            pub fn stack_effect(self) -> (usize, usize) {
                match self {
                    $(Sys::$name => ($pops, $pushes),)*
                }
            }
        }
    };
}

syscalls! {
    MOTION_PTP = 0, "MOTION_PTP", 2, 0;
    MOTION_LIN = 1, "MOTION_LIN", 2, 0;
    SET_OUT = 2, "SET_OUT", 2, 0;
    GET_IN = 3, "GET_IN", 1, 1;
    TRIGGER_ARM = 4, "TRIGGER_ARM", 4, 0;
    INT_DECL = 5, "INT_DECL", 2, 0;
    INT_ON = 6, "INT_ON", 1, 0;
    INT_OFF = 7, "INT_OFF", 1, 0;
    BRAKE = 8, "BRAKE", 0, 0;
    WAIT_SEC = 9, "WAIT_SEC", 1, 0;
    WAIT_FOR = 10, "WAIT_FOR", 0, 0;
    FLUSH = 11, "FLUSH", 0, 0;
    HALT = 12, "HALT", 0, 0;
    PEEK_IN = 13, "PEEK_IN", 1, 1;
    GET_OUT = 14, "GET_OUT", 1, 1;
    PEEK_OUT = 15, "PEEK_OUT", 1, 1;
    GET_POS = 16, "GET_POS", 0, 1;
    PEEK_POS = 17, "PEEK_POS", 0, 1;
    GET_AXIS = 18, "GET_AXIS", 0, 1;
    PEEK_AXIS = 19, "PEEK_AXIS", 0, 1;
}

impl Sys {
    pub fn parse(text: &str) -> Option<Sys> {
        Sys::ALL.iter().copied().find(|s| s.name() == text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bytes_round_trip() {
        for &op in Op::ALL {
            assert_eq!(Op::from_byte(op as u8), Some(op));
            assert_eq!(Op::parse(op.mnemonic()), Some(op));
        }
        for &s in Sys::ALL {
            assert_eq!(Sys::from_byte(s as u8), Some(s));
        }
    }
}
