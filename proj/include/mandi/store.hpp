#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mandi/data_model.hpp"
#include "mandi/forecast.hpp"
#include "mandi/impute.hpp"

namespace mandi {

/// Raw and imputed daily prices for one produce as archived by a run.
struct PanelHistory {
    SparsePanel raw_price;
    DensePanel imputed_price;
};

/// One published day: forecasts plus the panels they were computed from. Immutable once loaded.
struct Snapshot {
    std::string id;
    Date run_date{};
    std::vector<ForecastRecord> forecasts;  // ordered by (produce, market_id, q)
    std::map<std::string, PanelHistory> history;

    std::vector<std::string> produce() const;
    std::vector<const ForecastRecord*> forecasts_for(const std::string& market_id, const std::string& produce) const;
};

class StoreBusy : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Test instrumentation: called after each file the store writes, with a short event name.
struct StoreHooks {
    std::function<void(const std::string& event)> on_write;
};

struct MergeStats {
    std::size_t added = 0;
    std::size_t replaced = 0;
};

/// Directory-backed store.
///
///   markets.csv                      registry
///   observations.csv                 all rows, one per (date, market_id, produce)
///   models/<produce>/<market>/q<q>/  v<N>.json plus a `current` pointer file
///   snapshots/<date>.<attempt>/      manifest.json, forecasts.json, history/<produce>.csv
///   published                        id of the live snapshot
///   runs.jsonl                       append-only run reports
///   lock                             writer lease
///
/// Every file is replaced by write-then-rename, and snapshots become visible only when their
/// directory is renamed into place, so readers never see partial data.
class Store {
public:
    explicit Store(std::filesystem::path root, StoreHooks hooks = {});

    const std::filesystem::path& root() const { return root_; }

    MarketRegistry markets() const;
    void put_markets(const MarketRegistry& registry);

    std::vector<ObservationRow> observations() const;
    /// Last-wins merge keyed by (date, market_id, produce).
    MergeStats merge_observations(const std::vector<ObservationRow>& rows);

    std::optional<int> current_model_version(const std::string& produce, const std::string& market_id, int q) const;
    std::optional<StoredModel> load_current_model(const std::string& produce, const std::string& market_id,
                                                  int q) const;
    StoredModel load_model(const std::string& produce, const std::string& market_id, int q, int version) const;
    /// Stores `model` under the next version number and points `current` at it. Returns the version.
    int put_model(StoredModel model);

    /// Writes the snapshot under a staging name and renames it into place. Returns its id.
    std::string archive_snapshot(const Snapshot& snapshot);
    std::shared_ptr<const Snapshot> load_snapshot(const std::string& id) const;
    /// Atomically repoints `published`.
    void publish(const std::string& id);
    std::optional<std::string> published_id() const;
    /// The live snapshot, reloaded when the pointer has moved. Null before the first publish.
    std::shared_ptr<const Snapshot> published() const;

    void append_run(const nlohmann::json& report);
    std::vector<nlohmann::json> runs() const;
    /// 1 + number of recorded runs for `run_date`.
    int next_attempt(Date run_date) const;

    /// Exclusive writer lease, released on destruction.
    class Lease {
    public:
        Lease(Lease&& other) noexcept;
        Lease& operator=(Lease&&) = delete;
        ~Lease();

    private:
        friend class Store;
        explicit Lease(std::filesystem::path path) : path_(std::move(path)) {}
        std::filesystem::path path_;
    };

    /// Throws StoreBusy if another writer holds the lease.
    Lease acquire_lease(const std::string& owner);

private:
    void notify(const std::string& event) const;
    std::filesystem::path model_dir(const std::string& produce, const std::string& market_id, int q) const;

    std::filesystem::path root_;
    StoreHooks hooks_;
    mutable std::mutex snapshot_mu_;
    mutable std::shared_ptr<const Snapshot> cached_;
};

/// Replaces `path` with `contents` via a temporary file, fsync and rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace mandi
