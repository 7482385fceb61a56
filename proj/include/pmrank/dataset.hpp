#pragma once

#include <map>
#include <set>

#include "pmrank/csv.hpp"
#include "pmrank/market.hpp"

namespace pmrank {

// Column mapping and filter thresholds for click-stream ingestion. Roles are
// fixed; the CSV column carrying each role is declared in a manifest, so
// other datasets with the same shape map in without code changes.
struct ExpediaSchema {
    std::map<std::string, std::string> columns = {
        {"impression_id", "srch_id"},      {"hotel_id", "prop_id"},
        {"position", "position"},          {"price", "price_usd"},
        {"promotion", "promotion_flag"},   {"star_rating", "prop_starrating"},
        {"review_score", "prop_review_score"}, {"chain", "prop_brand_bool"},
        {"location_score", "prop_location_score1"}, {"booking_window", "srch_booking_window"},
        {"clicked", "click_bool"},         {"purchased", "booking_bool"},
        {"nights", "srch_length_of_stay"}, {"total_price", "gross_bookings_usd"},
        {"click_order", "click_order"}};  // click_order optional (-1 when absent)

    double min_price = 10.0;
    double max_price = 1000.0;
    double total_price_ratio = 1.30;
    double price_unit = 100.0;  // dollars per utility unit of the price column
    enum class PairMode { ExactlyOneClicked, ClickOrder } pair_mode = PairMode::ExactlyOneClicked;
    int min_impressions = 100;
    int min_displayed = 24;

    std::string col(const std::string& role) const {
        const auto it = columns.find(role);
        if (it == columns.end()) throw ConfigError("schema has no role: " + role);
        return it->second;
    }
};

inline ExpediaSchema expedia_schema_from_json(const nlohmann::json& j) {
    ExpediaSchema s;
    if (j.contains("columns"))
        for (const auto& [role, name] : j.at("columns").items()) {
            if (s.columns.find(role) == s.columns.end())
                throw ConfigError("unknown column role in manifest: " + role);
            s.columns[role] = name.get<std::string>();
        }
    s.min_price = j.value("min_price", 10.0);
    s.max_price = j.value("max_price", 1000.0);
    s.total_price_ratio = j.value("total_price_ratio", 1.30);
    s.price_unit = j.value("price_unit", 100.0);
    const std::string mode = j.value("pair_mode", "exactly_one_clicked");
    if (mode == "exactly_one_clicked")
        s.pair_mode = ExpediaSchema::PairMode::ExactlyOneClicked;
    else if (mode == "click_order")
        s.pair_mode = ExpediaSchema::PairMode::ClickOrder;
    else
        throw ConfigError("unknown pair_mode: " + mode);
    s.min_impressions = j.value("min_impressions", 100);
    s.min_displayed = j.value("min_displayed", 24);
    return s;
}

inline nlohmann::json expedia_schema_to_json(const ExpediaSchema& s) {
    return nlohmann::json{
        {"spec_version", kSpecVersion},
        {"columns", s.columns},
        {"min_price", s.min_price},
        {"max_price", s.max_price},
        {"total_price_ratio", s.total_price_ratio},
        {"price_unit", s.price_unit},
        {"pair_mode", s.pair_mode == ExpediaSchema::PairMode::ExactlyOneClicked
                          ? "exactly_one_clicked"
                          : "click_order"},
        {"min_impressions", s.min_impressions},
        {"min_displayed", s.min_displayed}};
}

struct HotelRow {
    int hotel = 0;
    double position = 0.0;
    double price = 0.0;  // dollars per night as read
    double promotion = 0.0;
    double star = 0.0;
    double review = 0.0;
    double chain = 0.0;
    double location = 0.0;
    double nights = 1.0;
    double total_price = 0.0;
    int clicked = 0;
    int purchased = 0;
    int click_order = -1;
};

struct Impression {
    long id = 0;
    double booking_window = 0.0;
    std::vector<HotelRow> hotels;
};

struct FilterReport {
    std::size_t impressions_in = 0;
    std::size_t dropped_price_band = 0;
    std::size_t dropped_total_price = 0;
    std::size_t bad_rows = 0;
    std::vector<std::pair<std::size_t, std::string>> bad_row_details;
};

struct ExpediaDataset {
    ExpediaSchema schema;
    std::vector<Impression> impressions;  // sorted by id
    FilterReport report;
};

// Ingest + the two clean-up filters: drop any impression containing a hotel
// priced out of [min_price, max_price] per night (strict inequalities), or a
// hotel whose total price exceeds ratio * price * nights (strictly).
inline ExpediaDataset load_and_filter(const std::string& csv_path, const ExpediaSchema& schema) {
    const CsvTable csv = read_csv(csv_path);
    ExpediaDataset ds;
    ds.schema = schema;
    const std::vector<std::string> required = {
        "impression_id", "hotel_id", "position", "price",     "promotion",
        "star_rating",   "review_score", "chain", "location_score", "booking_window",
        "clicked",       "purchased", "nights",  "total_price"};
    std::map<std::string, int> idx;
    for (const auto& role : required) {
        const int c = csv.column(schema.col(role));
        if (c < 0)
            throw DataError("missing column '" + schema.col(role) + "' for role " + role);
        idx[role] = c;
    }
    const int click_order_col = csv.column(schema.col("click_order"));

    std::map<long, Impression> by_id;
    std::size_t lineno = 1;  // header was line 1
    for (const auto& row : csv.rows) {
        ++lineno;
        try {
            HotelRow h;
            const long imp = static_cast<long>(
                parse_double_field(row[idx["impression_id"]], "impression_id"));
            h.hotel = static_cast<int>(parse_double_field(row[idx["hotel_id"]], "hotel_id"));
            h.position = parse_double_field(row[idx["position"]], "position");
            if (h.position < 1.0) throw DataError("position must be >= 1");
            h.price = parse_double_field(row[idx["price"]], "price");
            h.promotion = parse_double_field(row[idx["promotion"]], "promotion");
            h.star = parse_double_field(row[idx["star_rating"]], "star_rating");
            h.review = parse_double_field(row[idx["review_score"]], "review_score");
            h.chain = parse_double_field(row[idx["chain"]], "chain");
            h.location = parse_double_field(row[idx["location_score"]], "location_score");
            h.nights = parse_double_field(row[idx["nights"]], "nights");
            h.total_price = parse_double_field(row[idx["total_price"]], "total_price");
            h.clicked = parse_double_field(row[idx["clicked"]], "clicked") != 0.0 ? 1 : 0;
            h.purchased = parse_double_field(row[idx["purchased"]], "purchased") != 0.0 ? 1 : 0;
            if (h.purchased && !h.clicked) throw DataError("purchased without click");
            if (click_order_col >= 0)
                h.click_order =
                    static_cast<int>(parse_double_field(row[click_order_col], "click_order"));
            auto& impression = by_id[imp];
            impression.id = imp;
            impression.booking_window =
                parse_double_field(row[idx["booking_window"]], "booking_window");
            impression.hotels.push_back(h);
        } catch (const DataError& e) {
            ds.report.bad_rows++;
            ds.report.bad_row_details.emplace_back(lineno, e.what());
        }
    }

    ds.report.impressions_in = by_id.size();
    for (auto& [id, impression] : by_id) {
        bool drop_price = false, drop_total = false;
        for (const auto& h : impression.hotels) {
            if (h.price < ds.schema.min_price || h.price > ds.schema.max_price)
                drop_price = true;
            if (h.total_price > ds.schema.total_price_ratio * h.price * h.nights)
                drop_total = true;
        }
        if (drop_price) {
            ds.report.dropped_price_band++;
            continue;
        }
        if (drop_total) {
            ds.report.dropped_total_price++;
            continue;
        }
        ds.impressions.push_back(std::move(impression));
    }
    return ds;  // std::map iteration gives ascending impression ids
}

// hotels appearing in strictly more than min_impressions impressions
inline std::vector<std::pair<int, int>> eligible_pairs(const ExpediaDataset& ds,
                                                       int min_impressions = 100) {
    std::map<int, int> counts;
    for (const auto& imp : ds.impressions) {
        std::set<int> seen;
        for (const auto& h : imp.hotels) seen.insert(h.hotel);
        for (int hotel : seen) counts[hotel]++;
    }
    std::vector<int> eligible;
    for (const auto& [hotel, count] : counts)
        if (count > min_impressions) eligible.push_back(hotel);
    std::vector<std::pair<int, int>> pairs;
    for (std::size_t a = 0; a < eligible.size(); ++a)
        for (std::size_t b = a + 1; b < eligible.size(); ++b)
            pairs.emplace_back(eligible[a], eligible[b]);
    return pairs;
}

// impressions displaying strictly more than min_displayed hotels
inline std::vector<long> eligible_impressions(const ExpediaDataset& ds, int min_displayed = 24) {
    std::vector<long> out;
    for (const auto& imp : ds.impressions)
        if (static_cast<int>(imp.hotels.size()) > min_displayed) out.push_back(imp.id);
    return out;
}

// Outcome tables for hotel pairs. Default mode keeps impressions clicking on
// exactly one hotel of the pair; click-order mode additionally keeps
// both-clicked impressions and ranks by click order (needs the click_order
// column). x columns: price ($price_unit units), promotion, then the
// impression-invariant set; z columns: position, booking window.
inline std::vector<PairOutcomeTable> build_pair_tables(
    const ExpediaDataset& ds, const std::vector<std::pair<int, int>>& pairs) {
    std::vector<PairOutcomeTable> tables;
    tables.reserve(pairs.size());
    for (const auto& [hi, hj] : pairs) {
        PairOutcomeTable t;
        t.product_i = hi;
        t.product_j = hj;
        t.q_x = 6;
        t.q_z = 2;
        t.x_names = {"price", "promotion", "star_rating", "review_score", "chain",
                     "location_score"};
        t.z_names = {"position", "booking_window"};
        for (const auto& imp : ds.impressions) {
            const HotelRow* ri = nullptr;
            const HotelRow* rj = nullptr;
            for (const auto& h : imp.hotels) {
                if (h.hotel == hi) ri = &h;
                if (h.hotel == hj) rj = &h;
            }
            if (!ri || !rj) continue;  // the pair must be displayed together
            int s = -1;
            if (ri->clicked + rj->clicked == 1) {
                s = ri->clicked ? 1 : 0;
            } else if (ri->clicked + rj->clicked == 2 &&
                       ds.schema.pair_mode == ExpediaSchema::PairMode::ClickOrder) {
                if (ri->click_order < 0 || rj->click_order < 0)
                    throw DataError("click_order mode needs the click_order column");
                s = ri->click_order < rj->click_order ? 1 : 0;
            }
            if (s < 0) continue;
            const VecD xi{ri->price / ds.schema.price_unit, ri->promotion, ri->star,
                          ri->review,  ri->chain,           ri->location};
            const VecD xj{rj->price / ds.schema.price_unit, rj->promotion, rj->star,
                          rj->review,  rj->chain,           rj->location};
            const VecD zi{ri->position, imp.booking_window};
            const VecD zj{rj->position, imp.booking_window};
            t.push_row(static_cast<int>(imp.id), s, xi.data(), xj.data(), zi.data(), zj.data());
        }
        tables.push_back(std::move(t));
    }
    return tables;
}

// re-serialize back to the schema's column layout (filter idempotence tests
// and fixture tooling)
inline std::string to_expedia_csv(const ExpediaDataset& ds) {
    const auto& s = ds.schema;
    std::string out = s.col("impression_id") + "," + s.col("hotel_id") + "," +
                      s.col("position") + "," + s.col("price") + "," + s.col("promotion") + "," +
                      s.col("star_rating") + "," + s.col("review_score") + "," + s.col("chain") +
                      "," + s.col("location_score") + "," + s.col("booking_window") + "," +
                      s.col("clicked") + "," + s.col("purchased") + "," + s.col("nights") + "," +
                      s.col("total_price") + "," + s.col("click_order") + "\n";
    for (const auto& imp : ds.impressions)
        for (const auto& h : imp.hotels)
            out += std::to_string(imp.id) + "," + std::to_string(h.hotel) + "," +
                   format_double(h.position) + "," + format_double(h.price) + "," +
                   format_double(h.promotion) + "," + format_double(h.star) + "," +
                   format_double(h.review) + "," + format_double(h.chain) + "," +
                   format_double(h.location) + "," + format_double(imp.booking_window) + "," +
                   std::to_string(h.clicked) + "," + std::to_string(h.purchased) + "," +
                   format_double(h.nights) + "," + format_double(h.total_price) + "," +
                   std::to_string(h.click_order) + "\n";
    return out;
}

}  // namespace pmrank
