/// Default size of the addressable window.
pub const DEFAULT_WINDOW: u32 = 1 << 20;

const PAGE_BITS: u32 = 12;
const PAGE_SIZE: usize = 1 << PAGE_BITS;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MemFault {
    /// Outside the window, or inside the null guard page.
    Unmapped(u32),
    Misaligned(u32),
}

/// Sparse byte-addressable memory over `[0, window)`. The first page is a
/// guard and always faults; pages are allocated on first write and read as
/// zero until then.
#[derive(Clone, PartialEq, Eq)]
pub struct Memory {
    window: u32,
    pages: Vec<Option<Box<[u8; PAGE_SIZE]>>>,
}

impl std::fmt::Debug for Memory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let resident = self.pages.iter().filter(|p| p.is_some()).count();
        f.debug_struct("Memory").field("window", &self.window).field("resident_pages", &resident).finish()
    }
}

impl Default for Memory {
    fn default() -> Self {
        Memory::new(DEFAULT_WINDOW)
    }
}

impl Memory {
    /// `window` is rounded up to a whole page.
    pub fn new(window: u32) -> Self {
        let pages = (window as usize).div_ceil(PAGE_SIZE);
        Memory { window: (pages * PAGE_SIZE) as u32, pages: vec![None; pages] }
    }

    pub fn window(&self) -> u32 {
        self.window
    }

    fn check(&self, addr: u32, len: u32) -> Result<(), MemFault> {
        if !addr.is_multiple_of(len) {
            return Err(MemFault::Misaligned(addr));
        }
        if (addr as usize) < PAGE_SIZE || addr.checked_add(len).is_none_or(|end| end > self.window) {
            return Err(MemFault::Unmapped(addr));
        }
        Ok(())
    }

    fn split(addr: u32) -> (usize, usize) {
        ((addr >> PAGE_BITS) as usize, addr as usize & (PAGE_SIZE - 1))
    }

    pub fn read_u8(&self, addr: u32) -> Result<u8, MemFault> {
        self.check(addr, 1)?;
        let (page, off) = Self::split(addr);
        Ok(self.pages[page].as_ref().map_or(0, |p| p[off]))
    }

    pub fn read_u32(&self, addr: u32) -> Result<u32, MemFault> {
        self.check(addr, 4)?;
        let (page, off) = Self::split(addr);
        Ok(self.pages[page]
            .as_ref()
            .map_or(0, |p| u32::from_le_bytes([p[off], p[off + 1], p[off + 2], p[off + 3]])))
    }

    fn page_mut(&mut self, page: usize) -> &mut [u8; PAGE_SIZE] {
        self.pages[page].get_or_insert_with(|| Box::new([0; PAGE_SIZE]))
    }

    pub fn write_u8(&mut self, addr: u32, value: u8) -> Result<(), MemFault> {
        self.check(addr, 1)?;
        let (page, off) = Self::split(addr);
        self.page_mut(page)[off] = value;
        Ok(())
    }

    pub fn write_u32(&mut self, addr: u32, value: u32) -> Result<(), MemFault> {
        self.check(addr, 4)?;
        let (page, off) = Self::split(addr);
        self.page_mut(page)[off..off + 4].copy_from_slice(&value.to_le_bytes());
        Ok(())
    }

    /// Copies `bytes` starting at `addr`, byte by byte.
    pub fn write_bytes(&mut self, addr: u32, bytes: &[u8]) -> Result<(), MemFault> {
        for (i, b) in bytes.iter().enumerate() {
            self.write_u8(addr + i as u32, *b)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparse_reads_are_zero() {
        let mem = Memory::default();
        assert_eq!(mem.read_u32(0x8000), Ok(0));
        assert_eq!(mem.read_u8(DEFAULT_WINDOW - 1), Ok(0));
    }

    #[test]
    fn faults() {
        let mut mem = Memory::default();
        assert_eq!(mem.read_u32(0x0), Err(MemFault::Unmapped(0)));
        assert_eq!(mem.read_u32(0x2002), Err(MemFault::Misaligned(0x2002)));
        assert_eq!(mem.write_u32(DEFAULT_WINDOW, 1), Err(MemFault::Unmapped(DEFAULT_WINDOW)));
        assert_eq!(mem.read_u32(0xFFFF_FFFC), Err(MemFault::Unmapped(0xFFFF_FFFC)));
        mem.write_u32(0x2000, 0xDEADBEEF).unwrap();
        assert_eq!(mem.read_u8(0x2000), Ok(0xEF));
        assert_eq!(mem.read_u32(0x2000), Ok(0xDEADBEEF));
    }
}
