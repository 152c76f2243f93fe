from evalign.events.io import (
    CSV_HEADER,
    Event,
    EventStream,
    parse_events,
    write_events,
    write_events_csv,
)
from evalign.events.windows import (
    EventWindow,
    WindowSpec,
    window_fixed_count,
    window_fixed_time,
)

__all__ = [
    "CSV_HEADER",
    "Event",
    "EventStream",
    "EventWindow",
    "WindowSpec",
    "parse_events",
    "window_fixed_count",
    "window_fixed_time",
    "write_events",
    "write_events_csv",
]
