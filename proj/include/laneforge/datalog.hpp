#pragma once

#include <array>
#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "laneforge/frame.hpp"

namespace laneforge {

struct Sample {
    std::int64_t timestamp_ms = 0;
    double speed_mps = 0.0;
    double steer_deg = 0.0;
    double throttle = 0.0;  // [-1, 1], negative = brake or reverse
    std::string frame_file;

    bool operator==(const Sample&) const = default;
};

inline constexpr std::string_view kCsvHeader = "timestamp_ms,speed_mps,steer_deg,throttle,frame_file";

class MalformedRow : public std::runtime_error {
public:
    MalformedRow(std::size_t row, const std::string& what) : std::runtime_error(what), row_(row) {}
    std::size_t row() const { return row_; }

private:
    std::size_t row_;
};

std::string format_row(const Sample& s);
std::string format_csv(std::span<const Sample> rows);
/// Throws MalformedRow carrying `row`.
Sample parse_row(std::string_view line, std::size_t row);

struct CsvParse {
    std::vector<Sample> rows;
    std::vector<std::size_t> malformed;  // 0-based data row indices that were skipped
};
/// Header line required; malformed rows are skipped and reported.
CsvParse parse_csv(std::string_view text);

bool keep_row(const Sample& s, double steer_limit_deg);
/// Keeps rows with speed > 0, throttle >= 0 and |steer| <= limit, in order.
std::vector<Sample> filter_rows(std::span<const Sample> rows, double steer_limit_deg);

/// One training example: a single frame or a time-ordered triplet.
struct LabeledSample {
    std::vector<Frame> frames;
    double steer_deg = 0.0;
};

/// Originals followed by their horizontally flipped copies with negated steer.
std::vector<LabeledSample> mirror_augment(std::span<const LabeledSample> data);

/// Median spacing of consecutive timestamps.
double estimate_period_ms(std::span<const Sample> rows);
/// Index triplets (t-2, t-1, t) whose consecutive gaps are all at most
/// 1.5 sampling periods.
std::vector<std::array<std::size_t, 3>> make_triplets(std::span<const Sample> rows, double period_ms);

/// Writes `log.csv`, `frames/` and `meta.txt` under one run directory.
class RunWriter {
public:
    explicit RunWriter(std::filesystem::path run_dir);

    /// Fresh `run_{timestamp}` directory under root.
    static std::filesystem::path make_run_dir(const std::filesystem::path& root);

    void append(Sample sample, const Frame& frame);
    void write_meta(std::string_view text);
    void flush();
    const std::filesystem::path& dir() const { return dir_; }
    std::size_t rows() const { return rows_; }

private:
    std::filesystem::path dir_;
    std::ofstream csv_;
    std::size_t rows_ = 0;
};

struct RunData {
    std::filesystem::path dir;
    std::vector<Sample> rows;
    std::size_t malformed = 0;
    std::string meta;

    Frame frame(const Sample& s) const;
};

RunData load_run(const std::filesystem::path& run_dir);
/// Every directory under root holding a log.csv, sorted by name.
std::vector<std::filesystem::path> find_runs(const std::filesystem::path& root);

enum class QueuePolicy : std::uint8_t { DropNewest, Block };

template <class T>
class BoundedQueue {
public:
    BoundedQueue(std::size_t capacity, QueuePolicy policy) : capacity_(capacity), policy_(policy) {
        if (capacity == 0) throw std::invalid_argument("queue capacity must be positive");
    }

    /// False when the item was dropped (full queue with DropNewest, or closed).
    bool push(T item) {
        std::unique_lock lock(mu_);
        if (policy_ == QueuePolicy::Block) {
            not_full_.wait(lock, [&] { return closed_ || items_.size() < capacity_; });
        }
        if (closed_ || items_.size() >= capacity_) {
            ++dropped_;
            return false;
        }
        items_.push_back(std::move(item));
        not_empty_.notify_one();
        return true;
    }

    /// Blocks until an item arrives; empty once closed and drained.
    std::optional<T> pop() {
        std::unique_lock lock(mu_);
        not_empty_.wait(lock, [&] { return closed_ || !items_.empty(); });
        return take_locked();
    }

    std::optional<T> try_pop() {
        std::lock_guard lock(mu_);
        return take_locked();
    }

    void close() {
        std::lock_guard lock(mu_);
        closed_ = true;
        not_empty_.notify_all();
        not_full_.notify_all();
    }

    std::size_t size() const {
        std::lock_guard lock(mu_);
        return items_.size();
    }
    std::size_t dropped() const {
        std::lock_guard lock(mu_);
        return dropped_;
    }

private:
    std::optional<T> take_locked() {
        if (items_.empty()) return std::nullopt;
        T item = std::move(items_.front());
        items_.pop_front();
        not_full_.notify_one();
        return item;
    }

    std::size_t capacity_;
    QueuePolicy policy_;
    mutable std::mutex mu_;
    std::condition_variable not_empty_;
    std::condition_variable not_full_;
    std::deque<T> items_;
    std::size_t dropped_ = 0;
    bool closed_ = false;
};

/// RunWriter on its own thread, fed through a bounded queue. An IO failure
/// stops logging with a warning; producers are never blocked by it.
class AsyncRunWriter {
public:
    AsyncRunWriter(std::filesystem::path run_dir, std::size_t capacity, QueuePolicy policy);
    ~AsyncRunWriter();
    AsyncRunWriter(const AsyncRunWriter&) = delete;
    AsyncRunWriter& operator=(const AsyncRunWriter&) = delete;

    bool submit(Sample sample, Frame frame);
    void write_meta(std::string_view text);
    /// Drains the queue and joins the writer.
    void close();

    std::size_t dropped() const { return queue_.dropped(); }
    std::size_t written() const { return written_.load(); }
    bool failed() const { return failed_.load(); }
    const std::filesystem::path& dir() const { return writer_.dir(); }

private:
    struct Item {
        Sample sample;
        Frame frame;
    };
    void run();

    RunWriter writer_;
    BoundedQueue<Item> queue_;
    std::atomic<std::size_t> written_{0};
    std::atomic<bool> failed_{false};
    std::thread thread_;
    bool closed_ = false;
};

}  // namespace laneforge
