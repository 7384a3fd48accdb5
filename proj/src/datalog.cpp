#include "laneforge/datalog.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <sstream>

#include <spdlog/spdlog.h>

#include "laneforge/textutil.hpp"

namespace laneforge {

std::string format_row(const Sample& s) {
    return std::to_string(s.timestamp_ms) + ',' + format_double(s.speed_mps) + ',' + format_double(s.steer_deg) + ',' +
           format_double(s.throttle) + ',' + s.frame_file;
}

std::string format_csv(std::span<const Sample> rows) {
    std::string out(kCsvHeader);
    out += '\n';
    for (const auto& r : rows) {
        out += format_row(r);
        out += '\n';
    }
    return out;
}

Sample parse_row(std::string_view line, std::size_t row) {
    const auto fields = split(trim(line), ',');
    if (fields.size() != 5) throw MalformedRow(row, "row " + std::to_string(row) + ": expected 5 fields");
    try {
        Sample s;
        s.timestamp_ms = parse_int(fields[0]);
        s.speed_mps = parse_double(fields[1]);
        s.steer_deg = parse_double(fields[2]);
        s.throttle = parse_double(fields[3]);
        s.frame_file = std::string(trim(fields[4]));
        if (s.frame_file.empty()) throw std::invalid_argument("empty frame file");
        return s;
    } catch (const std::invalid_argument& e) {
        throw MalformedRow(row, "row " + std::to_string(row) + ": " + e.what());
    }
}

CsvParse parse_csv(std::string_view text) {
    auto lines = split_lines(text);
    if (lines.empty() || trim(lines.front()) != kCsvHeader) throw std::runtime_error("log.csv: missing or wrong header");
    CsvParse out;
    std::size_t row = 0;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        try {
            out.rows.push_back(parse_row(lines[i], row));
        } catch (const MalformedRow& e) {
            out.malformed.push_back(e.row());
        }
        ++row;
    }
    return out;
}

bool keep_row(const Sample& s, double steer_limit_deg) {
    return s.speed_mps > 0.0 && s.throttle >= 0.0 && std::abs(s.steer_deg) <= steer_limit_deg;
}

std::vector<Sample> filter_rows(std::span<const Sample> rows, double steer_limit_deg) {
    std::vector<Sample> out;
    std::copy_if(rows.begin(), rows.end(), std::back_inserter(out),
                 [&](const Sample& s) { return keep_row(s, steer_limit_deg); });
    return out;
}

std::vector<LabeledSample> mirror_augment(std::span<const LabeledSample> data) {
    std::vector<LabeledSample> out(data.begin(), data.end());
    out.reserve(2 * data.size());
    for (const auto& s : data) {
        LabeledSample m;
        m.steer_deg = -s.steer_deg;
        for (const auto& f : s.frames) m.frames.push_back(flip_horizontal(f));
        out.push_back(std::move(m));
    }
    return out;
}

double estimate_period_ms(std::span<const Sample> rows) {
    std::vector<double> gaps;
    for (std::size_t i = 1; i < rows.size(); ++i) gaps.push_back(double(rows[i].timestamp_ms - rows[i - 1].timestamp_ms));
    if (gaps.empty()) return 0.0;
    std::nth_element(gaps.begin(), gaps.begin() + std::ptrdiff_t(gaps.size() / 2), gaps.end());
    return gaps[gaps.size() / 2];
}

std::vector<std::array<std::size_t, 3>> make_triplets(std::span<const Sample> rows, double period_ms) {
    std::vector<std::array<std::size_t, 3>> out;
    auto close = [&](std::size_t a, std::size_t b) {
        return double(rows[b].timestamp_ms - rows[a].timestamp_ms) <= 1.5 * period_ms;
    };
    for (std::size_t t = 2; t < rows.size(); ++t) {
        if (close(t - 2, t - 1) && close(t - 1, t)) out.push_back({t - 2, t - 1, t});
    }
    return out;
}

RunWriter::RunWriter(std::filesystem::path run_dir) : dir_(std::move(run_dir)) {
    std::filesystem::create_directories(dir_ / "frames");
    csv_.open(dir_ / "log.csv", std::ios::binary | std::ios::trunc);
    if (!csv_) throw std::runtime_error("cannot create " + (dir_ / "log.csv").string());
    csv_ << kCsvHeader << '\n';
}

std::filesystem::path RunWriter::make_run_dir(const std::filesystem::path& root) {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y%m%d_%H%M%S", &tm);
    std::filesystem::path dir = root / (std::string("run_") + stamp);
    for (int k = 1; std::filesystem::exists(dir); ++k) dir = root / ("run_" + std::string(stamp) + "_" + std::to_string(k));
    return dir;
}

void RunWriter::append(Sample sample, const Frame& frame) {
    write_pgm(dir_ / "frames" / sample.frame_file, frame);
    sample.frame_file = "frames/" + sample.frame_file;
    csv_ << format_row(sample) << '\n';
    if (!csv_) throw std::runtime_error("write failed: " + (dir_ / "log.csv").string());
    ++rows_;
}

void RunWriter::write_meta(std::string_view text) {
    std::ofstream out(dir_ / "meta.txt", std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) throw std::runtime_error("cannot write meta.txt");
}

void RunWriter::flush() { csv_.flush(); }

Frame RunData::frame(const Sample& s) const { return read_pgm(dir / s.frame_file); }

RunData load_run(const std::filesystem::path& run_dir) {
    auto slurp = [](const std::filesystem::path& p) {
        std::ifstream in(p, std::ios::binary);
        if (!in) throw std::runtime_error("cannot open " + p.string());
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    RunData out;
    out.dir = run_dir;
    CsvParse parsed = parse_csv(slurp(run_dir / "log.csv"));
    out.rows = std::move(parsed.rows);
    out.malformed = parsed.malformed.size();
    if (out.malformed > 0) spdlog::warn("{}: skipped {} malformed rows", run_dir.string(), out.malformed);
    if (std::filesystem::exists(run_dir / "meta.txt")) out.meta = slurp(run_dir / "meta.txt");
    return out;
}

std::vector<std::filesystem::path> find_runs(const std::filesystem::path& root) {
    std::vector<std::filesystem::path> out;
    if (std::filesystem::exists(root / "log.csv")) out.push_back(root);
    if (std::filesystem::is_directory(root)) {
        for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
            if (e.is_directory() && std::filesystem::exists(e.path() / "log.csv")) out.push_back(e.path());
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

AsyncRunWriter::AsyncRunWriter(std::filesystem::path run_dir, std::size_t capacity, QueuePolicy policy)
    : writer_(std::move(run_dir)), queue_(capacity, policy) {
    thread_ = std::thread([this] { run(); });
}

AsyncRunWriter::~AsyncRunWriter() { close(); }

bool AsyncRunWriter::submit(Sample sample, Frame frame) {
    if (failed_.load()) return false;
    return queue_.push(Item{std::move(sample), std::move(frame)});
}

void AsyncRunWriter::write_meta(std::string_view text) { writer_.write_meta(text); }

void AsyncRunWriter::close() {
    if (closed_) return;
    closed_ = true;
    queue_.close();
    if (thread_.joinable()) thread_.join();
    writer_.flush();
}

void AsyncRunWriter::run() {
    while (auto item = queue_.pop()) {
        if (failed_.load()) continue;
        try {
            writer_.append(std::move(item->sample), item->frame);
            ++written_;
        } catch (const std::exception& e) {
            failed_ = true;
            spdlog::warn("logging stopped: {}", e.what());
        }
    }
}

}  // namespace laneforge
