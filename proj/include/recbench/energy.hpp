#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace recbench {

// ---------------------------------------------------------------- clocks

// Monotone time in seconds. wait() lets procedures that poll on a cadence
// run against simulated time.
class Clock {
public:
    virtual ~Clock() = default;
    virtual double now_s() = 0;
    virtual void wait(double seconds) = 0;
};

class WallClock final : public Clock {
public:
    WallClock();
    double now_s() override;
    void wait(double seconds) override;

private:
    std::int64_t origin_ns_;
};

// Advances only when told to.
class ManualClock final : public Clock {
public:
    double now_s() override { return t_.load(); }
    void wait(double seconds) override { advance(seconds); }
    void advance(double seconds);

private:
    std::atomic<double> t_{0.0};
};

// Time derived from the process work counter: `seconds_per_unit` of
// simulated time per unit of model work. Deterministic for a given workload.
class WorkClock final : public Clock {
public:
    explicit WorkClock(double seconds_per_unit);
    double now_s() override;
    void wait(double seconds) override;

private:
    double spu_;
    std::uint64_t origin_;
};

enum class ClockKind { wall, work, simulated };

// --------------------------------------------------------------- meters

struct PowerSample {
    std::int64_t timestamp_ms = 0;  // unix epoch milliseconds
    double power_w = 0.0;
    double cumulative_wh = 0.0;
    bool missing = false;
};

struct PowerReading {
    double power_w = 0.0;
    double cumulative_wh = 0.0;
};

enum class MeterKind { shelly_gen2, mock_constant, mock_trace };
std::string to_string(MeterKind k);
MeterKind parse_meter_kind(const std::string& s);

struct MeterConfig {
    MeterKind kind = MeterKind::mock_constant;
    std::string device;  // directory name under measurements/; defaults per kind
    // shelly-gen2
    std::string host = "127.0.0.1";
    int port = 80;
    int switch_id = 0;
    double timeout_s = 2.0;
    // cadence
    double poll_interval_s = 0.5;
    double rotation_interval_s = 300.0;
    // mocks
    double constant_watts = 71.2;
    std::filesystem::path trace_file;
    ClockKind clock = ClockKind::wall;
    double work_seconds_per_unit = 1e-9;

    void validate() const;
    std::string device_name() const;
};

MeterConfig meter_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const MeterConfig& c);
MeterConfig load_meter_settings(const std::filesystem::path& path);
// Reads "emission_factor" (gCO2e/kWh) from a monitor settings file.
double load_emission_factor(const std::filesystem::path& path);

class Meter {
public:
    virtual ~Meter() = default;
    // nullopt marks a missing sample.
    virtual std::optional<PowerReading> read() = 0;
};

class ConstantMeter final : public Meter {
public:
    ConstantMeter(double watts, std::shared_ptr<Clock> clock, double start_wh = 0.0);
    std::optional<PowerReading> read() override;

private:
    double watts_;
    std::shared_ptr<Clock> clock_;
    double start_wh_;
    double origin_s_;
};

// Replays rows of (power_w, cumulative_wh); an empty cell marks a missing
// sample. After the last row the final reading repeats.
class TraceMeter final : public Meter {
public:
    explicit TraceMeter(std::vector<std::optional<PowerReading>> rows);
    static TraceMeter from_csv(const std::filesystem::path& path);
    std::optional<PowerReading> read() override;

private:
    std::vector<std::optional<PowerReading>> rows_;
    std::size_t next_ = 0;
};

// Shelly Gen-2 RPC: GET /rpc/Switch.GetStatus?id=N, fields apower (W) and
// aenergy.total (Wh).
class ShellyGen2Meter final : public Meter {
public:
    ShellyGen2Meter(std::string host, int port, int switch_id, double timeout_s);
    std::optional<PowerReading> read() override;

private:
    std::string host_;
    int port_;
    int switch_id_;
    double timeout_s_;
};

// Builds a meter and the clock its readings live on.
struct MeterBundle {
    std::shared_ptr<Meter> meter;
    std::shared_ptr<Clock> clock;
};
MeterBundle make_meter(const MeterConfig& cfg);

// ------------------------------------------------------------- sessions

struct EnergyResult {
    double e_start_wh = 0.0;
    double e_end_wh = 0.0;
    double e_experiment_wh = 0.0;
    std::int64_t sample_count = 0;  // valid samples
    double duration_s = 0.0;
    double mean_power_w = 0.0;
};

// Delta method over the first and last valid samples.
EnergyResult energy_from_samples(const std::vector<PowerSample>& samples);

struct CarbonReport {
    double emission_factor = 0.0;  // gCO2e/kWh
    double grams_co2e = 0.0;
};

double carbon_grams(double energy_wh, double emission_factor);
CarbonReport carbon(const EnergyResult& e, double emission_factor);

struct SessionOptions {
    std::filesystem::path root = "measurements";
    // Background sampling thread at poll_interval; otherwise samples are
    // taken only by tick() (plus one at start and one at stop).
    bool background = true;
    // Timeline for timestamps, cadence and rotation. Defaults to wall time.
    std::shared_ptr<Clock> clock;
};

class MeasurementSession {
public:
    static std::unique_ptr<MeasurementSession> start(const std::string& model, const std::string& dataset,
                                                     std::shared_ptr<Meter> meter, const MeterConfig& cfg,
                                                     SessionOptions opt = {});
    ~MeasurementSession();
    MeasurementSession(const MeasurementSession&) = delete;
    MeasurementSession& operator=(const MeasurementSession&) = delete;

    void tick();
    EnergyResult stop();

    bool active() const noexcept { return active_; }
    const std::string& experiment_name() const noexcept { return name_; }
    const std::filesystem::path& directory() const noexcept { return dir_; }
    std::vector<std::filesystem::path> segments() const;
    std::vector<PowerSample> samples() const;

private:
    MeasurementSession() = default;
    void sample_locked();
    void open_segment_locked(int index);
    void run_sampler();
    void release_device();

    std::shared_ptr<Meter> meter_;
    std::shared_ptr<Clock> clock_;
    MeterConfig cfg_;
    std::string device_;
    std::string name_;
    std::filesystem::path dir_;
    double t0_ = 0.0;
    std::int64_t epoch0_ms_ = 0;
    std::int64_t last_ms_ = -1;
    int segment_ = 0;
    std::ofstream out_;
    std::vector<std::filesystem::path> paths_;
    std::vector<PowerSample> samples_;
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::thread sampler_;
    bool stopping_ = false;
    bool active_ = false;
};

// Mean power over `duration_s` of polling at `poll_interval_s`.
double measure_idle_baseline(Meter& meter, Clock& clock, double duration_s, double poll_interval_s = 0.5);
// Throws MeterError when the measured idle power is outside expected +- band.
void check_idle_baseline(double measured_w, double expected_w, double band_w);

}  // namespace recbench
