//! Bundled bitmap atlas for emoji and text overlays.
//!
//! Sprites are 8x8 masks (bit 7 is the leftmost column); glyphs are 5x7
//! masks (bit 4 leftmost). Rendering scales each set bit to a square block.

/// Eight small pictograms standing in for emoji.
pub const EMOJI: [[u8; 8]; 8] = [
    // smiley
    [0x3C, 0x42, 0xA5, 0x81, 0xA5, 0x99, 0x42, 0x3C],
    // heart
    [0x00, 0x66, 0xFF, 0xFF, 0xFF, 0x7E, 0x3C, 0x18],
    // star
    [0x18, 0x18, 0xFF, 0x7E, 0x3C, 0x7E, 0x66, 0x42],
    // sun
    [0x91, 0x52, 0x3C, 0xFF, 0xFF, 0x3C, 0x52, 0x91],
    // diamond
    [0x18, 0x3C, 0x7E, 0xFF, 0xFF, 0x7E, 0x3C, 0x18],
    // check mark
    [0x01, 0x03, 0x06, 0x8C, 0xD8, 0x70, 0x20, 0x00],
    // skull
    [0x7E, 0xFF, 0x99, 0x99, 0xFF, 0x7E, 0x5A, 0x5A],
    // arrow
    [0x18, 0x3C, 0x7E, 0xDB, 0x18, 0x18, 0x18, 0x18],
];

pub const GLYPH_CHARS: &str = "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";

const FONT: [[u8; 7]; 36] = [
    [0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11], // A
    [0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E], // B
    [0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E], // C
    [0x1E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1E], // D
    [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F], // E
    [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10], // F
    [0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F], // G
    [0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11], // H
    [0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E], // I
    [0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C], // J
    [0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11], // K
    [0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F], // L
    [0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11], // M
    [0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11], // N
    [0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E], // O
    [0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10], // P
    [0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D], // Q
    [0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11], // R
    [0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E], // S
    [0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04], // T
    [0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E], // U
    [0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04], // V
    [0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A], // W
    [0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11], // X
    [0x11, 0x11, 0x0A, 0x04, 0x04, 0x04, 0x04], // Y
    [0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F], // Z
    [0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E], // 0
    [0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E], // 1
    [0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F], // 2
    [0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E], // 3
    [0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02], // 4
    [0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E], // 5
    [0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E], // 6
    [0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08], // 7
    [0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E], // 8
    [0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C], // 9
];

/// A monochrome mask addressed by (column, row).
pub trait Mask {
    fn size(&self) -> (u32, u32);
    fn is_set(&self, col: u32, row: u32) -> bool;
}

pub struct Sprite(pub &'static [u8; 8]);

impl Mask for Sprite {
    fn size(&self) -> (u32, u32) {
        (8, 8)
    }

    fn is_set(&self, col: u32, row: u32) -> bool {
        self.0[row as usize] & (0x80 >> col) != 0
    }
}

/// A line of text in the bundled 5x7 font with one blank column between glyphs.
pub struct TextLine(Vec<&'static [u8; 7]>);

impl TextLine {
    /// Characters outside [`GLYPH_CHARS`] are rendered as blanks.
    pub fn new(text: &str) -> Self {
        const BLANK: [u8; 7] = [0; 7];
        TextLine(
            text.chars()
                .map(|c| {
                    GLYPH_CHARS
                        .find(c.to_ascii_uppercase())
                        .map(|i| &FONT[i])
                        .unwrap_or(&BLANK)
                })
                .collect(),
        )
    }
}

impl Mask for TextLine {
    fn size(&self) -> (u32, u32) {
        let n = self.0.len() as u32;
        ((n * 6).saturating_sub(1).max(1), 7)
    }

    fn is_set(&self, col: u32, row: u32) -> bool {
        let (glyph, c) = ((col / 6) as usize, col % 6);
        c < 5 && glyph < self.0.len() && self.0[glyph][row as usize] & (0x10 >> c) != 0
    }
}
