#include "mandi/store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>
#include <tuple>

namespace mandi {

namespace fs = std::filesystem;

namespace {

std::atomic<unsigned> temp_counter{0};

[[noreturn]] void throw_errno(const std::string& what, const fs::path& path) {
    throw std::runtime_error(what + " " + path.string() + ": " + std::strerror(errno));
}

// Keeps ids usable as single path components.
std::string path_component(const std::string& id) {
    std::ostringstream out;
    for (unsigned char c : id) {
        if (std::isalnum(c) || c == '-' || c == '_' || c == '.') {
            out << c;
        } else {
            out << '%' << std::uppercase << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(c)
                << std::dec;
        }
    }
    auto s = out.str();
    if (s.empty() || s == "." || s == "..") s = "%" + s;
    return s;
}

std::string format_number(double v) {
    std::ostringstream out;
    out << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
    return out.str();
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

constexpr const char* kHistoryHeader = "date,market_id,raw_price,imputed_price";

std::string history_csv(const PanelHistory& h) {
    std::ostringstream out;
    out << kHistoryHeader << '\n';
    const auto& raw = h.raw_price;
    for (std::size_t t = 0; t < raw.num_days; ++t) {
        const auto day = format_date(raw.date_of(t));
        for (std::size_t m = 0; m < raw.num_markets(); ++m) {
            out << day << ',' << path_component(raw.markets[m]) << ',';
            if (const auto& v = raw.values(m, t)) out << format_number(*v);
            out << ',' << format_number(h.imputed_price.values(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(t)))
                << '\n';
        }
    }
    return out.str();
}

PanelHistory parse_history(const std::string& csv, const std::string& produce, const std::vector<std::string>& markets,
                           Date start, std::size_t num_days) {
    PanelHistory h;
    h.raw_price.produce = produce;
    h.raw_price.markets = markets;
    h.raw_price.start_date = start;
    h.raw_price.num_days = num_days;
    h.raw_price.values = Grid<std::optional<double>>(markets.size(), num_days);
    h.imputed_price.produce = produce;
    h.imputed_price.markets = markets;
    h.imputed_price.start_date = start;
    h.imputed_price.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(markets.size()),
                                                   static_cast<Eigen::Index>(num_days));
    std::map<std::string, std::size_t> index;
    for (std::size_t m = 0; m < markets.size(); ++m) index[path_component(markets[m])] = m;

    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    if (line != kHistoryHeader) throw std::runtime_error("snapshot history: bad header");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != 4) throw std::runtime_error("snapshot history: bad row '" + line + "'");
        const auto t = static_cast<std::size_t>(days_between(start, parse_date(cells[0])));
        const auto m = index.at(cells[1]);
        if (t >= num_days) throw std::runtime_error("snapshot history: date out of range");
        if (!cells[2].empty()) h.raw_price.values(m, t) = std::stod(cells[2]);
        h.imputed_price.values(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(t)) = std::stod(cells[3]);
    }
    return h;
}

}  // namespace

void write_file_atomic(const fs::path& path, const std::string& contents) {
    fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp." + std::to_string(::getpid()) + "." + std::to_string(temp_counter++);
    const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    if (fd < 0) throw_errno("cannot create", tmp);
    std::size_t done = 0;
    while (done < contents.size()) {
        const auto n = ::write(fd, contents.data() + done, contents.size() - done);
        if (n < 0) {
            if (errno == EINTR) continue;
            ::close(fd);
            throw_errno("cannot write", tmp);
        }
        done += static_cast<std::size_t>(n);
    }
    if (::fsync(fd) != 0 || ::close(fd) != 0) throw_errno("cannot flush", tmp);
    fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

std::vector<std::string> Snapshot::produce() const {
    std::set<std::string> names;
    for (const auto& [name, h] : history) names.insert(name);
    for (const auto& r : forecasts) names.insert(r.produce);
    return {names.begin(), names.end()};
}

std::vector<const ForecastRecord*> Snapshot::forecasts_for(const std::string& market_id,
                                                           const std::string& produce) const {
    std::vector<const ForecastRecord*> out;
    for (const auto& r : forecasts) {
        if (r.market_id == market_id && r.produce == produce) out.push_back(&r);
    }
    return out;
}

Store::Store(fs::path root, StoreHooks hooks) : root_(std::move(root)), hooks_(std::move(hooks)) {
    fs::create_directories(root_ / "snapshots");
    fs::create_directories(root_ / "models");
}

void Store::notify(const std::string& event) const {
    if (hooks_.on_write) hooks_.on_write(event);
}

MarketRegistry Store::markets() const {
    const auto path = root_ / "markets.csv";
    if (!fs::exists(path)) return {};
    std::ifstream in(path);
    return parse_markets(in);
}

void Store::put_markets(const MarketRegistry& registry) {
    std::ostringstream out;
    write_markets(out, registry);
    write_file_atomic(root_ / "markets.csv", out.str());
    notify("markets");
}

std::vector<ObservationRow> Store::observations() const {
    const auto path = root_ / "observations.csv";
    if (!fs::exists(path)) return {};
    std::ifstream in(path);
    return parse_observations(in);
}

MergeStats Store::merge_observations(const std::vector<ObservationRow>& rows) {
    using Key = std::tuple<Date, std::string, std::string>;
    std::map<Key, ObservationRow> merged;
    for (auto& r : observations()) {
        Key key{r.date, r.market_id, r.produce};
        merged.insert_or_assign(std::move(key), std::move(r));
    }
    MergeStats stats;
    for (const auto& r : rows) {
        auto [it, inserted] = merged.insert_or_assign(Key{r.date, r.market_id, r.produce}, r);
        (inserted ? stats.added : stats.replaced) += 1;
    }
    std::vector<ObservationRow> all;
    all.reserve(merged.size());
    for (auto& [key, row] : merged) all.push_back(std::move(row));
    std::ostringstream out;
    write_observations(out, all);
    write_file_atomic(root_ / "observations.csv", out.str());
    notify("observations");
    return stats;
}

fs::path Store::model_dir(const std::string& produce, const std::string& market_id, int q) const {
    return root_ / "models" / path_component(produce) / path_component(market_id) / ("q" + std::to_string(q));
}

std::optional<int> Store::current_model_version(const std::string& produce, const std::string& market_id,
                                                int q) const {
    const auto pointer = model_dir(produce, market_id, q) / "current";
    if (!fs::exists(pointer)) return std::nullopt;
    return std::stoi(read_file(pointer));
}

StoredModel Store::load_model(const std::string& produce, const std::string& market_id, int q, int version) const {
    const auto path = model_dir(produce, market_id, q) / ("v" + std::to_string(version) + ".json");
    return model_from_json(nlohmann::json::parse(read_file(path)));
}

std::optional<StoredModel> Store::load_current_model(const std::string& produce, const std::string& market_id,
                                                     int q) const {
    const auto version = current_model_version(produce, market_id, q);
    if (!version) return std::nullopt;
    return load_model(produce, market_id, q, *version);
}

int Store::put_model(StoredModel model) {
    const auto dir = model_dir(model.meta.produce, model.meta.market_id, model.meta.q);
    fs::create_directories(dir);
    int latest = 0;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const auto name = entry.path().filename().string();
        if (name.size() > 6 && name.front() == 'v' && name.ends_with(".json")) {
            latest = std::max(latest, std::stoi(name.substr(1, name.size() - 6)));
        }
    }
    model.meta.version = latest + 1;
    write_file_atomic(dir / ("v" + std::to_string(model.meta.version) + ".json"), model_to_json(model).dump());
    notify("model");
    write_file_atomic(dir / "current", std::to_string(model.meta.version));
    notify("model-pointer");
    return model.meta.version;
}

std::string Store::archive_snapshot(const Snapshot& snapshot) {
    const auto final_dir = root_ / "snapshots" / snapshot.id;
    const auto staging = root_ / "snapshots" / (".staging-" + snapshot.id + "." + std::to_string(::getpid()));
    fs::remove_all(staging);
    fs::create_directories(staging / "history");

    nlohmann::json manifest{{"id", snapshot.id},
                            {"run_date", format_date(snapshot.run_date)},
                            {"forecast_count", snapshot.forecasts.size()},
                            {"produce", nlohmann::json::object()}};
    for (const auto& [produce, h] : snapshot.history) {
        manifest["produce"][produce] = {{"markets", h.raw_price.markets},
                                        {"start_date", format_date(h.raw_price.start_date)},
                                        {"num_days", h.raw_price.num_days},
                                        {"file", "history/" + path_component(produce) + ".csv"}};
        write_file_atomic(staging / "history" / (path_component(produce) + ".csv"), history_csv(h));
        notify("archive:history");
    }
    nlohmann::json forecasts = nlohmann::json::array();
    for (const auto& r : snapshot.forecasts) forecasts.push_back(to_json(r));
    write_file_atomic(staging / "forecasts.json", forecasts.dump());
    notify("archive:forecasts");
    write_file_atomic(staging / "manifest.json", manifest.dump(2));
    notify("archive:manifest");

    // A rerun of the same attempt id replaces the earlier directory.
    if (fs::exists(final_dir)) fs::remove_all(final_dir);
    fs::rename(staging, final_dir);
    notify("archive:rename");
    return snapshot.id;
}

std::shared_ptr<const Snapshot> Store::load_snapshot(const std::string& id) const {
    const auto dir = root_ / "snapshots" / id;
    const auto manifest = nlohmann::json::parse(read_file(dir / "manifest.json"));
    auto snap = std::make_shared<Snapshot>();
    snap->id = manifest.at("id");
    snap->run_date = parse_date(manifest.at("run_date").get<std::string>());
    for (const auto& j : nlohmann::json::parse(read_file(dir / "forecasts.json"))) {
        snap->forecasts.push_back(forecast_from_json(j));
    }
    if (snap->forecasts.size() != manifest.at("forecast_count").get<std::size_t>()) {
        throw std::runtime_error("snapshot " + id + ": forecast count does not match the manifest");
    }
    for (const auto& [produce, p] : manifest.at("produce").items()) {
        snap->history.emplace(produce, parse_history(read_file(dir / p.at("file").get<std::string>()), produce,
                                                     p.at("markets").get<std::vector<std::string>>(),
                                                     parse_date(p.at("start_date").get<std::string>()),
                                                     p.at("num_days").get<std::size_t>()));
    }
    return snap;
}

void Store::publish(const std::string& id) {
    if (!fs::is_directory(root_ / "snapshots" / id)) throw std::invalid_argument("publish: no snapshot " + id);
    write_file_atomic(root_ / "published", id);
    notify("publish");
}

std::optional<std::string> Store::published_id() const {
    const auto path = root_ / "published";
    if (!fs::exists(path)) return std::nullopt;
    return read_file(path);
}

std::shared_ptr<const Snapshot> Store::published() const {
    const auto id = published_id();
    if (!id) return nullptr;
    std::lock_guard lock(snapshot_mu_);
    if (!cached_ || cached_->id != *id) cached_ = load_snapshot(*id);
    return cached_;
}

void Store::append_run(const nlohmann::json& report) {
    const auto path = root_ / "runs.jsonl";
    const auto line = report.dump() + "\n";
    const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd < 0) throw_errno("cannot open", path);
    const auto n = ::write(fd, line.data(), line.size());
    const bool ok = n == static_cast<ssize_t>(line.size()) && ::fsync(fd) == 0;
    ::close(fd);
    if (!ok) throw_errno("cannot append to", path);
    notify("runs");
}

std::vector<nlohmann::json> Store::runs() const {
    std::vector<nlohmann::json> out;
    const auto path = root_ / "runs.jsonl";
    if (!fs::exists(path)) return out;
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) {
        if (in.eof()) break;  // an append still in progress
        if (!line.empty()) out.push_back(nlohmann::json::parse(line));
    }
    return out;
}

int Store::next_attempt(Date run_date) const {
    const auto day = format_date(run_date);
    int n = 0;
    for (const auto& r : runs()) n += r.value("run_date", "") == day;
    return n + 1;
}

Store::Lease::Lease(Lease&& other) noexcept : path_(std::move(other.path_)) { other.path_.clear(); }

Store::Lease::~Lease() {
    if (path_.empty()) return;
    std::error_code ec;
    fs::remove(path_, ec);
}

Store::Lease Store::acquire_lease(const std::string& owner) {
    const auto path = root_ / "lock";
    const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_EXCL | O_CLOEXEC, 0644);
    if (fd < 0) {
        if (errno == EEXIST) {
            std::string holder;
            try {
                holder = read_file(path);
            } catch (const std::exception&) {
            }
            throw StoreBusy("store is locked by " + (holder.empty() ? std::string("another writer") : holder));
        }
        throw_errno("cannot create", path);
    }
    const auto text = owner + " pid " + std::to_string(::getpid());
    [[maybe_unused]] const auto n = ::write(fd, text.data(), text.size());
    ::close(fd);
    return Lease(path);
}

}  // namespace mandi
