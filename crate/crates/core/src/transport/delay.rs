use std::thread;
use std::time::Duration;

use super::{CollectiveStats, Communicator};
use crate::error::Result;
use crate::tensor::ComplexSample;

/// Instrumented communicator that stalls every all-to-all by a fixed delay
/// before delegating. Used to make communication time observable in tests.
pub struct Delayed {
    inner: Box<dyn Communicator>,
    delay: Duration,
}

impl Delayed {
    pub fn new(inner: Box<dyn Communicator>, delay: Duration) -> Self {
        Delayed { inner, delay }
    }

    pub fn boxed(inner: Box<dyn Communicator>, delay: Duration) -> Box<dyn Communicator> {
        Box::new(Delayed::new(inner, delay))
    }
}

impl Communicator for Delayed {
    fn id(&self) -> u32 {
        self.inner.id()
    }

    fn members(&self) -> &[usize] {
        self.inner.members()
    }

    fn my_index(&self) -> usize {
        self.inner.my_index()
    }

    fn all_to_all(&mut self, send: &[ComplexSample], recv: &mut [ComplexSample]) -> Result<()> {
        thread::sleep(self.delay);
        self.inner.all_to_all(send, recv)
    }

    fn barrier(&mut self) -> Result<()> {
        self.inner.barrier()
    }

    fn reduce_minmax(&mut self, value: f64) -> Result<Option<(f64, f64)>> {
        self.inner.reduce_minmax(value)
    }

    fn gather(&mut self, data: &[ComplexSample]) -> Result<Option<Vec<Vec<ComplexSample>>>> {
        self.inner.gather(data)
    }

    fn stats(&self) -> CollectiveStats {
        self.inner.stats()
    }
}
