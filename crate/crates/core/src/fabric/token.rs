use alloc::string::String;

use super::topic::TopicId;
use crate::ids::TokenId;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "kebab-case"))]
pub enum TokenState {
    Pending,
    Notified,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("token {token} already resolved ({state:?})")]
pub struct TokenResolved {
    pub token: TokenId,
    pub state: TokenState,
}

/// Asynchronous completion token for request-notify interactions.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct CompletionToken {
    pub token: TokenId,
    state: TokenState,
    pub result_topic: TopicId,
    pub failure: Option<String>,
}

impl CompletionToken {
    pub fn new(token: TokenId, result_topic: TopicId) -> Self {
        CompletionToken {
            token,
            state: TokenState::Pending,
            result_topic,
            failure: None,
        }
    }

    pub fn state(&self) -> TokenState {
        self.state
    }

    pub fn is_pending(&self) -> bool {
        self.state == TokenState::Pending
    }

    pub fn notify(&mut self) -> Result<(), TokenResolved> {
        self.resolve(TokenState::Notified)
    }

    pub fn fail(&mut self, reason: impl Into<String>) -> Result<(), TokenResolved> {
        self.resolve(TokenState::Failed)?;
        self.failure = Some(reason.into());
        Ok(())
    }

    fn resolve(&mut self, to: TokenState) -> Result<(), TokenResolved> {
        if self.state != TokenState::Pending {
            return Err(TokenResolved {
                token: self.token,
                state: self.state,
            });
        }
        self.state = to;
        Ok(())
    }
}
