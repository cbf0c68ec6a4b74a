use std::any::Any;
use std::fmt;
use std::rc::Rc;

/// Anything that can travel as an event value or failure cause.
pub trait Payload: Any + fmt::Debug {
    fn as_any(&self) -> &dyn Any;
}

impl<T: Any + fmt::Debug> Payload for T {
    fn as_any(&self) -> &dyn Any {
        self
    }
}

/// Opaque, cheaply cloneable value carried by events.
///
/// Values compare by identity (see [`Value::ptr_eq`]); the payload is
/// recovered with [`Value::downcast_ref`].
#[derive(Clone, Default)]
pub struct Value(Option<Rc<dyn Payload>>);

impl Value {
    pub fn new<T: Any + fmt::Debug>(payload: T) -> Self {
        Value(Some(Rc::new(payload)))
    }

    pub fn empty() -> Self {
        Value(None)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_none()
    }

    pub fn downcast_ref<T: Any>(&self) -> Option<&T> {
        self.0
            .as_deref()
            .and_then(|p| p.as_any().downcast_ref::<T>())
    }

    pub fn is<T: Any>(&self) -> bool {
        self.downcast_ref::<T>().is_some()
    }

    /// True when both values are the same allocation (or both empty).
    pub fn ptr_eq(&self, other: &Value) -> bool {
        match (&self.0, &other.0) {
            (None, None) => true,
            (Some(a), Some(b)) => Rc::ptr_eq(a, b),
            _ => false,
        }
    }
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0 {
            None => f.write_str("()"),
            Some(p) => fmt::Debug::fmt(&**p, f),
        }
    }
}

/// Result delivered when an event is processed.
#[derive(Debug, Clone)]
pub enum Outcome {
    Success(Value),
    Failure(Value),
}

impl Outcome {
    pub fn is_success(&self) -> bool {
        matches!(self, Outcome::Success(_))
    }

    pub fn value(&self) -> &Value {
        match self {
            Outcome::Success(v) | Outcome::Failure(v) => v,
        }
    }
}
