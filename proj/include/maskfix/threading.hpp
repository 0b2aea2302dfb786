#pragma once

#include <functional>

namespace maskfix {

// Number of worker threads to use. Honors the MASKFIX_THREADS environment
// variable when set (clamped to at least 1), otherwise falls back to the
// hardware concurrency.
int worker_count();

// Runs fn(0) .. fn(shard_count - 1) across up to worker_count() threads.
// Shards are independent units whose outputs the caller combines afterwards
// in shard order, so the result never depends on how many threads ran or on
// scheduling. Exceptions from shards are rethrown on the calling thread.
void parallel_shards(int shard_count, const std::function<void(int)>& fn);

}  // namespace maskfix
