#include "mandi/data_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

namespace mandi {

namespace {

// Splits one CSV record. Double-quoted fields may contain commas; "" escapes a quote.
std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
}

std::optional<double> parse_number(const std::string& cell, std::size_t line_no, const char* field) {
    if (cell.empty()) return std::nullopt;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc{} || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
        throw ParseError(line_no, std::string("unparseable ") + field + " '" + cell + "'");
    }
    return v;
}

std::string quote_if_needed(const std::string& s) {
    if (s.find_first_of(",\"") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::string format_number(double v) {
    std::ostringstream os;
    os << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
    return os.str();
}

double median_of(std::vector<double>& xs) {
    const std::size_t n = xs.size();
    std::sort(xs.begin(), xs.end());
    if (n % 2 == 1) return xs[n / 2];
    return 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

}  // namespace

MarketRegistry::MarketRegistry(std::vector<MarketRecord> markets) : markets_(std::move(markets)) {
    for (std::size_t i = 0; i < markets_.size(); ++i) {
        const auto& m = markets_[i];
        if (m.market_id.empty()) throw std::invalid_argument("market with empty market_id");
        if (m.latitude && (*m.latitude < -90.0 || *m.latitude > 90.0)) {
            throw std::invalid_argument("market " + m.market_id + ": latitude out of range");
        }
        if (m.longitude && (*m.longitude < -180.0 || *m.longitude > 180.0)) {
            throw std::invalid_argument("market " + m.market_id + ": longitude out of range");
        }
        if (!index_.emplace(m.market_id, i).second) {
            throw std::invalid_argument("duplicate market_id " + m.market_id);
        }
    }
}

std::optional<std::size_t> MarketRegistry::index_of(const std::string& market_id) const {
    auto it = index_.find(market_id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

const MarketRecord& MarketRegistry::at(const std::string& market_id) const {
    auto idx = index_of(market_id);
    if (!idx) throw std::out_of_range("unknown market " + market_id);
    return markets_[*idx];
}

std::vector<std::string> MarketRegistry::ids() const {
    std::vector<std::string> out;
    out.reserve(markets_.size());
    for (const auto& m : markets_) out.push_back(m.market_id);
    return out;
}

std::vector<ObservationRow> parse_observations(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw ParseError(1, "missing header");
    ++line_no;
    strip_cr(line);
    if (!line.empty() && static_cast<unsigned char>(line[0]) == 0xEF) {
        // UTF-8 byte order mark.
        if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    }
    if (line != kObservationHeader) {
        throw ParseError(1, std::string("malformed header, expected '") + kObservationHeader + "'");
    }

    std::vector<ObservationRow> rows;
    while (std::getline(in, line)) {
        ++line_no;
        strip_cr(line);
        if (line.empty()) continue;
        auto f = split_csv(line);
        if (f.size() != 5) {
            throw ParseError(line_no, "expected 5 fields, got " + std::to_string(f.size()));
        }
        auto date = try_parse_date(f[0]);
        if (!date) throw ParseError(line_no, "unparseable date '" + f[0] + "'");
        if (f[1].empty()) throw ParseError(line_no, "empty market_id");
        if (f[2].empty()) throw ParseError(line_no, "empty produce");
        ObservationRow row{*date, f[1], f[2], parse_number(f[3], line_no, "modal_price"),
                           parse_number(f[4], line_no, "volume")};
        if (row.modal_price && *row.modal_price <= 0.0) {
            throw ParseError(line_no, "modal_price must be > 0");
        }
        if (row.volume && *row.volume < 0.0) throw ParseError(line_no, "volume must be >= 0");
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<ObservationRow> parse_observations_string(const std::string& csv) {
    std::istringstream in(csv);
    return parse_observations(in);
}

void write_observations(std::ostream& out, const std::vector<ObservationRow>& rows) {
    out << kObservationHeader << '\n';
    for (const auto& r : rows) {
        out << format_date(r.date) << ',' << quote_if_needed(r.market_id) << ','
            << quote_if_needed(r.produce) << ',';
        if (r.modal_price) out << format_number(*r.modal_price);
        out << ',';
        if (r.volume) out << format_number(*r.volume);
        out << '\n';
    }
}

MarketRegistry parse_markets(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError(1, "missing header");
    strip_cr(line);
    if (line != kMarketHeader) {
        throw ParseError(1, std::string("malformed header, expected '") + kMarketHeader + "'");
    }
    std::vector<MarketRecord> markets;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        strip_cr(line);
        if (line.empty()) continue;
        auto f = split_csv(line);
        if (f.size() != 5) {
            throw ParseError(line_no, "expected 5 fields, got " + std::to_string(f.size()));
        }
        if (f[0].empty()) throw ParseError(line_no, "empty market_id");
        markets.push_back(MarketRecord{f[0], f[1], parse_number(f[2], line_no, "latitude"),
                                       parse_number(f[3], line_no, "longitude"), f[4]});
    }
    try {
        return MarketRegistry(std::move(markets));
    } catch (const std::invalid_argument& e) {
        throw ParseError(line_no, e.what());
    }
}

void write_markets(std::ostream& out, const MarketRegistry& registry) {
    out << kMarketHeader << '\n';
    for (const auto& m : registry.markets()) {
        out << quote_if_needed(m.market_id) << ',' << quote_if_needed(m.name) << ',';
        if (m.latitude) out << format_number(*m.latitude);
        out << ',';
        if (m.longitude) out << format_number(*m.longitude);
        out << ',' << quote_if_needed(m.state) << '\n';
    }
}

std::size_t SparsePanel::present_count() const {
    return static_cast<std::size_t>(
        std::count_if(values.cells().begin(), values.cells().end(), [](const auto& v) { return v.has_value(); }));
}

SparsePanel SparsePanel::slice_days(std::size_t first, std::size_t count) const {
    if (first + count > num_days) throw std::out_of_range("SparsePanel::slice_days: range past the panel");
    SparsePanel out;
    out.produce = produce;
    out.markets = markets;
    out.start_date = date_of(first);
    out.num_days = count;
    out.values = Grid<std::optional<double>>(num_markets(), count);
    for (std::size_t m = 0; m < num_markets(); ++m) {
        for (std::size_t t = 0; t < count; ++t) out.values(m, t) = values(m, first + t);
    }
    return out;
}

PanelPair build_panels(const std::vector<ObservationRow>& rows, const std::string& produce,
                       Date start_date, std::size_t num_days, const MarketRegistry& markets) {
    if (num_days < 1) throw std::invalid_argument("build_panels: num_days must be >= 1");
    if (markets.empty()) throw std::invalid_argument("build_panels: empty market registry");

    const std::size_t m_count = markets.size();
    PanelPair out;
    for (SparsePanel* p : {&out.price, &out.volume}) {
        p->produce = produce;
        p->markets = markets.ids();
        p->start_date = start_date;
        p->num_days = num_days;
        p->values = Grid<std::optional<double>>(m_count, num_days);
    }

    Grid<char> seen(m_count, num_days, 0);
    for (const auto& row : rows) {
        if (row.produce != produce) continue;
        auto m = markets.index_of(row.market_id);
        if (!m) {
            ++out.report.skipped_unknown_market;
            continue;
        }
        const long day = days_between(start_date, row.date);
        if (day < 0 || static_cast<std::size_t>(day) >= num_days) {
            ++out.report.skipped_out_of_range;
            continue;
        }
        const auto t = static_cast<std::size_t>(day);
        if (seen(*m, t)) ++out.report.duplicates_overwritten;
        seen(*m, t) = 1;
        // Last row wins for the whole (market, date) cell, including blanks.
        out.price.values(*m, t) = row.modal_price;
        out.volume.values(*m, t) = row.volume;
        ++out.report.rows_used;
    }
    return out;
}

std::vector<ObservationRow> flatten_panels(const SparsePanel& price, const SparsePanel& volume) {
    std::vector<ObservationRow> rows;
    for (std::size_t m = 0; m < price.num_markets(); ++m) {
        for (std::size_t t = 0; t < price.num_days; ++t) {
            const auto& p = price.values(m, t);
            const auto& v = volume.values(m, t);
            if (!p && !v) continue;
            rows.push_back(ObservationRow{price.date_of(t), price.markets[m], price.produce, p, v});
        }
    }
    return rows;
}

CleanResult clean_outliers(const SparsePanel& panel, const OutlierPolicy& policy) {
    CleanResult out{panel, {}};
    std::vector<double> window;
    for (std::size_t m = 0; m < panel.num_markets(); ++m) {
        for (std::size_t t = 0; t < panel.num_days; ++t) {
            const auto& cell = panel.values(m, t);
            if (!cell) continue;
            // Comparison points come from the input, so removals do not cascade.
            window.clear();
            const std::size_t first = t >= policy.window_days ? t - policy.window_days : 0;
            for (std::size_t u = first; u < t; ++u) {
                if (const auto& v = panel.values(m, u)) window.push_back(*v);
            }
            if (window.size() < policy.min_support) continue;
            const double med = median_of(window);
            if (*cell < med / policy.ratio || *cell > med * policy.ratio) {
                out.report.removed.push_back(RemovedCell{panel.markets[m], panel.date_of(t), *cell, med});
                out.panel.values(m, t).reset();
            }
        }
    }
    return out;
}

}  // namespace mandi
