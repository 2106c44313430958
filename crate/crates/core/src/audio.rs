/// Mono audio at a fixed sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBlock {
    pub sample_rate: u32,
    pub frames: Vec<f32>,
}

impl AudioBlock {
    pub fn new(sample_rate: u32, frames: Vec<f32>) -> Self {
        AudioBlock { sample_rate, frames }
    }

    pub fn silent(sample_rate: u32, len: usize) -> Self {
        AudioBlock { sample_rate, frames: vec![0.0; len] }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.frames.len() as f64 / self.sample_rate as f64
    }

    pub fn rms(&self) -> f64 {
        if self.frames.is_empty() {
            return 0.0;
        }
        let sum: f64 = self.frames.iter().map(|&s| (s as f64) * (s as f64)).sum();
        (sum / self.frames.len() as f64).sqrt()
    }

    pub fn peak(&self) -> f32 {
        self.frames.iter().fold(0.0f32, |m, s| m.max(s.abs()))
    }

    /// Largest absolute difference between consecutive samples.
    pub fn max_step(&self) -> f32 {
        self.frames.windows(2).fold(0.0f32, |m, w| m.max((w[1] - w[0]).abs()))
    }

    /// Sub-range by time, clamped to the block.
    pub fn slice_seconds(&self, start: f64, end: f64) -> AudioBlock {
        let fs = self.sample_rate as f64;
        let a = ((start * fs).round().max(0.0) as usize).min(self.frames.len());
        let b = ((end * fs).round().max(0.0) as usize).clamp(a, self.frames.len());
        AudioBlock { sample_rate: self.sample_rate, frames: self.frames[a..b].to_vec() }
    }
}
