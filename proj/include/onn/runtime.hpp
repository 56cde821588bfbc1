#pragma once

#include <cstddef>

namespace onn {

/// Keeps freed trace buffers in the heap instead of returning them to the OS.
/// Training allocates tens of megabytes per step; without this every step page-faults.
void tune_allocator();

/// Worker count: explicit value if nonzero, else ONN_WORKERS, else the OpenMP default.
std::size_t resolve_workers(std::size_t requested);
void set_workers(std::size_t workers);

}  // namespace onn
