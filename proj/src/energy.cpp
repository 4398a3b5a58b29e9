#include "recbench/energy.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <set>
#include <sstream>

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "recbench/error.hpp"
#include "recbench/work.hpp"

namespace recbench {

namespace fs = std::filesystem;

namespace {

std::int64_t steady_ns() {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

std::int64_t epoch_ms_now() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
}

std::tm utc(std::int64_t ms) {
    std::time_t secs = static_cast<std::time_t>(ms / 1000);
    std::tm tm{};
    gmtime_r(&secs, &tm);
    return tm;
}

std::string iso_timestamp(std::int64_t ms) {
    auto tm = utc(ms);
    char buf[40];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
    char out[48];
    std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms % 1000));
    return out;
}

std::string compact_timestamp(std::int64_t ms) {
    auto tm = utc(ms);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%S", &tm);
    return buf;
}

std::string fmt_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

std::mutex g_devices_mu;
std::set<std::string> g_busy_devices;

}  // namespace

// ---------------------------------------------------------------- clocks

WallClock::WallClock() : origin_ns_(steady_ns()) {}

double WallClock::now_s() { return static_cast<double>(steady_ns() - origin_ns_) * 1e-9; }

void WallClock::wait(double seconds) {
    if (seconds > 0) std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
}

void ManualClock::advance(double seconds) {
    if (seconds < 0) throw ConfigError("ManualClock: cannot go backwards");
    double cur = t_.load();
    while (!t_.compare_exchange_weak(cur, cur + seconds)) {
    }
}

WorkClock::WorkClock(double seconds_per_unit) : spu_(seconds_per_unit), origin_(work::total()) {
    if (!(seconds_per_unit > 0)) throw ConfigError("WorkClock: seconds_per_unit must be positive");
}

double WorkClock::now_s() { return static_cast<double>(work::total() - origin_) * spu_; }

void WorkClock::wait(double seconds) {
    if (seconds > 0) std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
}

// --------------------------------------------------------------- config

std::string to_string(MeterKind k) {
    switch (k) {
        case MeterKind::shelly_gen2: return "shelly-gen2";
        case MeterKind::mock_constant: return "mock-constant";
        case MeterKind::mock_trace: return "mock-trace";
    }
    return "?";
}

MeterKind parse_meter_kind(const std::string& s) {
    for (auto k : {MeterKind::shelly_gen2, MeterKind::mock_constant, MeterKind::mock_trace})
        if (to_string(k) == s) return k;
    throw ConfigError("unknown meter kind '" + s + "'");
}

namespace {

std::string to_string(ClockKind k) {
    switch (k) {
        case ClockKind::wall: return "wall";
        case ClockKind::work: return "work";
        case ClockKind::simulated: return "simulated";
    }
    return "?";
}

ClockKind parse_clock_kind(const std::string& s) {
    for (auto k : {ClockKind::wall, ClockKind::work, ClockKind::simulated})
        if (to_string(k) == s) return k;
    throw ConfigError("unknown meter clock '" + s + "'");
}

}  // namespace

void MeterConfig::validate() const {
    if (!(poll_interval_s > 0)) throw ConfigError("meter: poll_interval_s must be positive");
    if (!(rotation_interval_s > 0)) throw ConfigError("meter: rotation_interval_s must be positive");
    if (kind == MeterKind::mock_constant && !(constant_watts >= 0)) throw ConfigError("meter: constant_watts must be >= 0");
    if (kind == MeterKind::mock_trace && trace_file.empty()) throw ConfigError("meter: mock-trace needs trace_file");
    if (kind == MeterKind::shelly_gen2 && (host.empty() || port <= 0 || port > 65535))
        throw ConfigError("meter: shelly-gen2 needs host and port");
    if (!(timeout_s > 0)) throw ConfigError("meter: timeout_s must be positive");
    if (!(work_seconds_per_unit > 0)) throw ConfigError("meter: work_seconds_per_unit must be positive");
}

std::string MeterConfig::device_name() const {
    if (!device.empty()) return device;
    switch (kind) {
        case MeterKind::shelly_gen2: return "shelly-" + host;
        case MeterKind::mock_constant: return "mock-constant";
        case MeterKind::mock_trace: return "mock-trace";
    }
    return "meter";
}

MeterConfig meter_config_from_json(const nlohmann::json& j) {
    MeterConfig c;
    try {
        c.kind = parse_meter_kind(j.value("kind", std::string("mock-constant")));
        c.device = j.value("device", c.device);
        c.host = j.value("host", c.host);
        c.port = j.value("port", c.port);
        c.switch_id = j.value("switch_id", c.switch_id);
        c.timeout_s = j.value("timeout_s", c.timeout_s);
        c.poll_interval_s = j.value("poll_interval_s", c.poll_interval_s);
        c.rotation_interval_s = j.value("rotation_interval_s", c.rotation_interval_s);
        c.constant_watts = j.value("constant_watts", c.constant_watts);
        if (j.contains("trace_file")) c.trace_file = j["trace_file"].get<std::string>();
        c.clock = parse_clock_kind(j.value("clock", std::string("wall")));
        c.work_seconds_per_unit = j.value("work_seconds_per_unit", c.work_seconds_per_unit);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("meter settings: ") + e.what());
    }
    c.validate();
    return c;
}

nlohmann::json to_json(const MeterConfig& c) {
    nlohmann::json j = {{"kind", to_string(c.kind)},
                        {"device", c.device_name()},
                        {"poll_interval_s", c.poll_interval_s},
                        {"rotation_interval_s", c.rotation_interval_s},
                        {"clock", to_string(c.clock)}};
    switch (c.kind) {
        case MeterKind::shelly_gen2:
            j["host"] = c.host;
            j["port"] = c.port;
            j["switch_id"] = c.switch_id;
            j["timeout_s"] = c.timeout_s;
            break;
        case MeterKind::mock_constant: j["constant_watts"] = c.constant_watts; break;
        case MeterKind::mock_trace: j["trace_file"] = c.trace_file.string(); break;
    }
    if (c.clock == ClockKind::work) j["work_seconds_per_unit"] = c.work_seconds_per_unit;
    return j;
}

namespace {

nlohmann::json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

}  // namespace

MeterConfig load_meter_settings(const fs::path& path) { return meter_config_from_json(read_json_file(path)); }

double load_emission_factor(const fs::path& path) {
    auto j = read_json_file(path);
    if (!j.contains("emission_factor") || !j["emission_factor"].is_number())
        throw ConfigError(path.string() + ": missing numeric emission_factor");
    double f = j["emission_factor"].get<double>();
    if (!(f > 0)) throw ConfigError(path.string() + ": emission_factor must be positive");
    return f;
}

// --------------------------------------------------------------- meters

ConstantMeter::ConstantMeter(double watts, std::shared_ptr<Clock> clock, double start_wh)
    : watts_(watts), clock_(std::move(clock)), start_wh_(start_wh), origin_s_(clock_->now_s()) {}

std::optional<PowerReading> ConstantMeter::read() {
    const double elapsed = clock_->now_s() - origin_s_;
    return PowerReading{watts_, start_wh_ + watts_ * elapsed / 3600.0};
}

TraceMeter::TraceMeter(std::vector<std::optional<PowerReading>> rows) : rows_(std::move(rows)) {
    if (rows_.empty()) throw ConfigError("trace meter: empty trace");
}

TraceMeter TraceMeter::from_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open trace " + path.string());
    std::vector<std::optional<PowerReading>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto comma = line.find(',');
        if (comma == std::string::npos) throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected 2 columns");
        std::string a = line.substr(0, comma), b = line.substr(comma + 1);
        if (line_no == 1 && (a == "power_w" || a.find_first_of("abcdefghijklmnopqrstuvwxyz") != std::string::npos))
            continue;  // header
        if (a.empty() || b.empty()) {
            rows.emplace_back(std::nullopt);
            continue;
        }
        try {
            rows.emplace_back(PowerReading{std::stod(a), std::stod(b)});
        } catch (const std::exception&) {
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": unparseable reading");
        }
    }
    return TraceMeter(std::move(rows));
}

std::optional<PowerReading> TraceMeter::read() {
    const auto& r = rows_[std::min(next_, rows_.size() - 1)];
    if (next_ < rows_.size()) ++next_;
    return r;
}

ShellyGen2Meter::ShellyGen2Meter(std::string host, int port, int switch_id, double timeout_s)
    : host_(std::move(host)), port_(port), switch_id_(switch_id), timeout_s_(timeout_s) {}

std::optional<PowerReading> ShellyGen2Meter::read() {
    try {
        httplib::Client cli(host_, port_);
        const auto usec = static_cast<time_t>(timeout_s_ * 1e6);
        cli.set_connection_timeout(usec / 1000000, static_cast<time_t>(usec % 1000000));
        cli.set_read_timeout(usec / 1000000, static_cast<time_t>(usec % 1000000));
        auto res = cli.Get("/rpc/Switch.GetStatus?id=" + std::to_string(switch_id_));
        if (!res || res->status != 200) return std::nullopt;
        auto j = nlohmann::json::parse(res->body);
        PowerReading r{j.at("apower").get<double>(), j.at("aenergy").at("total").get<double>()};
        if (!(r.power_w >= 0) || !std::isfinite(r.cumulative_wh)) return std::nullopt;
        return r;
    } catch (const std::exception& e) {
        spdlog::debug("shelly read failed: {}", e.what());
        return std::nullopt;
    }
}

MeterBundle make_meter(const MeterConfig& cfg) {
    cfg.validate();
    MeterBundle b;
    switch (cfg.clock) {
        case ClockKind::wall: b.clock = std::make_shared<WallClock>(); break;
        case ClockKind::work: b.clock = std::make_shared<WorkClock>(cfg.work_seconds_per_unit); break;
        case ClockKind::simulated: b.clock = std::make_shared<ManualClock>(); break;
    }
    switch (cfg.kind) {
        case MeterKind::shelly_gen2:
            b.meter = std::make_shared<ShellyGen2Meter>(cfg.host, cfg.port, cfg.switch_id, cfg.timeout_s);
            break;
        case MeterKind::mock_constant: b.meter = std::make_shared<ConstantMeter>(cfg.constant_watts, b.clock); break;
        case MeterKind::mock_trace: b.meter = std::make_shared<TraceMeter>(TraceMeter::from_csv(cfg.trace_file)); break;
    }
    return b;
}

// ------------------------------------------------------------ accounting

EnergyResult energy_from_samples(const std::vector<PowerSample>& samples) {
    const PowerSample* first = nullptr;
    const PowerSample* last = nullptr;
    EnergyResult r;
    double power_sum = 0.0;
    for (const auto& s : samples) {
        if (s.missing) continue;
        if (!first) first = &s;
        last = &s;
        ++r.sample_count;
        power_sum += s.power_w;
    }
    if (r.sample_count < 2) throw MeterError("energy undefined: fewer than 2 valid samples");
    r.e_start_wh = first->cumulative_wh;
    r.e_end_wh = last->cumulative_wh;
    r.e_experiment_wh = r.e_end_wh - r.e_start_wh;
    if (r.e_experiment_wh < 0) throw MeterError("energy undefined: cumulative counter decreased");
    r.duration_s = static_cast<double>(last->timestamp_ms - first->timestamp_ms) / 1000.0;
    r.mean_power_w = power_sum / static_cast<double>(r.sample_count);
    return r;
}

double carbon_grams(double energy_wh, double emission_factor) {
    if (!(emission_factor > 0)) throw ConfigError("carbon: emission factor must be positive");
    return energy_wh / 1000.0 * emission_factor;
}

CarbonReport carbon(const EnergyResult& e, double emission_factor) {
    return {emission_factor, carbon_grams(e.e_experiment_wh, emission_factor)};
}

// -------------------------------------------------------------- session

std::unique_ptr<MeasurementSession> MeasurementSession::start(const std::string& model, const std::string& dataset,
                                                              std::shared_ptr<Meter> meter, const MeterConfig& cfg,
                                                              SessionOptions opt) {
    cfg.validate();
    if (!meter) throw ConfigError("session: no meter");
    std::unique_ptr<MeasurementSession> s(new MeasurementSession());
    s->meter_ = std::move(meter);
    s->clock_ = opt.clock ? opt.clock : std::make_shared<WallClock>();
    s->cfg_ = cfg;
    s->device_ = cfg.device_name();
    {
        std::lock_guard lk(g_devices_mu);
        if (!g_busy_devices.insert(s->device_).second)
            throw MeterError("device '" + s->device_ + "' is busy with another session");
    }
    try {
        s->t0_ = s->clock_->now_s();
        s->epoch0_ms_ = epoch_ms_now();
        const std::string base = "EXPERIMENT_" + model + "_" + dataset + "_" + compact_timestamp(s->epoch0_ms_);
        const fs::path device_dir = opt.root / s->device_;
        std::error_code ec;
        fs::create_directories(device_dir, ec);
        if (ec) throw MeterError("cannot create " + device_dir.string() + ": " + ec.message());
        s->name_ = base;
        for (int n = 2; fs::exists(device_dir / s->name_); ++n) s->name_ = base + "-" + std::to_string(n);
        s->dir_ = device_dir / s->name_;
        fs::create_directories(s->dir_, ec);
        if (ec) throw MeterError("cannot create " + s->dir_.string() + ": " + ec.message());
        std::lock_guard lk(s->mu_);
        s->open_segment_locked(1);
        s->active_ = true;
        s->sample_locked();
    } catch (...) {
        s->release_device();
        throw;
    }
    if (opt.background) s->sampler_ = std::thread([p = s.get()] { p->run_sampler(); });
    return s;
}

MeasurementSession::~MeasurementSession() {
    if (active_) {
        try {
            stop();
        } catch (const std::exception& e) {
            spdlog::warn("session {} closed with error: {}", name_, e.what());
        }
    }
}

void MeasurementSession::open_segment_locked(int index) {
    if (out_.is_open()) out_.close();
    segment_ = index;
    auto path = dir_ / ("part-" + std::to_string(index) + ".csv");
    out_.open(path);
    if (!out_) throw MeterError("cannot write " + path.string());
    out_ << "timestamp_iso,power_w,cumulative_wh,missing_flag\n";
    paths_.push_back(path);
}

void MeasurementSession::sample_locked() {
    const double t = clock_->now_s() - t0_;
    std::int64_t ms = epoch0_ms_ + static_cast<std::int64_t>(std::llround(t * 1000.0));
    if (ms <= last_ms_) ms = last_ms_ + 1;
    last_ms_ = ms;

    const int wanted = 1 + static_cast<int>(std::floor(t / cfg_.rotation_interval_s));
    if (wanted > segment_) open_segment_locked(segment_ + 1);

    PowerSample s;
    s.timestamp_ms = ms;
    if (auto r = meter_->read()) {
        s.power_w = r->power_w;
        s.cumulative_wh = r->cumulative_wh;
        out_ << iso_timestamp(ms) << ',' << fmt_double(s.power_w) << ',' << fmt_double(s.cumulative_wh) << ",0\n";
    } else {
        s.missing = true;
        out_ << iso_timestamp(ms) << ",,,1\n";
    }
    out_.flush();
    samples_.push_back(s);
}

void MeasurementSession::tick() {
    std::lock_guard lk(mu_);
    if (!active_) throw MeterError("session is not active");
    sample_locked();
}

void MeasurementSession::run_sampler() {
    std::unique_lock lk(mu_);
    const auto period = std::chrono::duration<double>(cfg_.poll_interval_s);
    auto next = std::chrono::steady_clock::now() + std::chrono::duration_cast<std::chrono::steady_clock::duration>(period);
    while (!stopping_) {
        if (cv_.wait_until(lk, next, [this] { return stopping_; })) break;
        try {
            sample_locked();
        } catch (const std::exception& e) {
            spdlog::warn("sampler: {}", e.what());
        }
        next += std::chrono::duration_cast<std::chrono::steady_clock::duration>(period);
    }
}

void MeasurementSession::release_device() {
    std::lock_guard lk(g_devices_mu);
    g_busy_devices.erase(device_);
}

EnergyResult MeasurementSession::stop() {
    {
        std::lock_guard lk(mu_);
        if (!active_) throw MeterError("session is not active");
        stopping_ = true;
    }
    cv_.notify_all();
    if (sampler_.joinable()) sampler_.join();
    std::vector<PowerSample> copy;
    {
        std::lock_guard lk(mu_);
        try {
            sample_locked();
        } catch (...) {
            out_.close();
            active_ = false;
            release_device();
            throw;
        }
        out_.close();
        active_ = false;
        copy = samples_;
    }
    release_device();
    return energy_from_samples(copy);
}

std::vector<fs::path> MeasurementSession::segments() const {
    std::lock_guard lk(mu_);
    return paths_;
}

std::vector<PowerSample> MeasurementSession::samples() const {
    std::lock_guard lk(mu_);
    return samples_;
}

// ----------------------------------------------------------- idle check

double measure_idle_baseline(Meter& meter, Clock& clock, double duration_s, double poll_interval_s) {
    if (!(duration_s > 0)) throw ConfigError("idle baseline: duration must be positive");
    if (!(poll_interval_s > 0)) throw ConfigError("idle baseline: poll interval must be positive");
    const auto polls = static_cast<std::int64_t>(std::floor(duration_s / poll_interval_s));
    double sum = 0.0;
    std::int64_t valid = 0;
    for (std::int64_t k = 0; k <= polls; ++k) {
        if (k > 0) clock.wait(poll_interval_s);
        if (auto r = meter.read()) {
            sum += r->power_w;
            ++valid;
        }
    }
    if (valid == 0) throw MeterError("idle baseline: meter returned no readings");
    return sum / static_cast<double>(valid);
}

void check_idle_baseline(double measured_w, double expected_w, double band_w) {
    if (std::abs(measured_w - expected_w) > band_w) {
        std::ostringstream os;
        os << "idle baseline " << measured_w << " W outside " << expected_w << " +- " << band_w << " W";
        throw MeterError(os.str());
    }
}

}  // namespace recbench
