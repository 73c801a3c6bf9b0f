//! Contract for bridging a hosted messaging platform to a session. Only an
//! in-process loopback implementation ships.

use std::collections::VecDeque;

use thiserror::Error;

use crate::frames::{InboundFrame, OutboundFrame};
use crate::session::SessionHandle;

#[derive(Debug, Error)]
pub enum AdapterError {
    #[error("platform delivery failed: {0}")]
    Delivery(String),
}

pub trait PlatformAdapter: Send {
    fn platform(&self) -> &str;
    /// Next frame received from the platform, if one is waiting.
    fn poll_inbound(&mut self) -> Option<InboundFrame>;
    fn deliver(&mut self, frame: &OutboundFrame) -> Result<(), AdapterError>;
}

/// Keeps inbound frames in a queue and delivered frames in a list.
#[derive(Debug, Default)]
pub struct LoopbackAdapter {
    pub inbound: VecDeque<InboundFrame>,
    pub delivered: Vec<OutboundFrame>,
}

impl PlatformAdapter for LoopbackAdapter {
    fn platform(&self) -> &str {
        "loopback"
    }

    fn poll_inbound(&mut self) -> Option<InboundFrame> {
        self.inbound.pop_front()
    }

    fn deliver(&mut self, frame: &OutboundFrame) -> Result<(), AdapterError> {
        self.delivered.push(frame.clone());
        Ok(())
    }
}

/// Forwards every waiting inbound frame to the session, then delivers the
/// frames sent after `delivered_up_to`. Returns the new high-water mark.
pub async fn relay(
    adapter: &mut dyn PlatformAdapter,
    session: &SessionHandle,
    delivered_up_to: u64,
) -> Result<u64, AdapterError> {
    while let Some(frame) = adapter.poll_inbound() {
        if let Err(e) = session.submit(frame).await {
            tracing::warn!(platform = adapter.platform(), %e, "inbound frame rejected");
        }
    }
    let mut mark = delivered_up_to;
    for frame in session.frames_after(delivered_up_to) {
        adapter.deliver(&frame)?;
        mark = frame.message.message_id;
    }
    Ok(mark)
}
