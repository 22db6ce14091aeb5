use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub const HOURS_PER_DAY: i64 = 24;

/// Day of week for an hour counted from the Unix epoch, Monday = 0.
pub fn day_of_week(unix_hour: i64) -> usize {
    let day = unix_hour.div_euclid(HOURS_PER_DAY);
    // 1970-01-01 was a Thursday
    (day + 3).rem_euclid(7) as usize
}

/// Holidays as day numbers since the Unix epoch.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HolidayCalendar {
    days: Vec<i64>,
}

impl HolidayCalendar {
    pub fn new(mut days: Vec<i64>) -> Self {
        days.sort_unstable();
        days.dedup();
        Self { days }
    }

    pub fn days(&self) -> &[i64] {
        &self.days
    }

    pub fn is_holiday(&self, unix_hour: i64) -> bool {
        self.days
            .binary_search(&unix_hour.div_euclid(HOURS_PER_DAY))
            .is_ok()
    }
}
