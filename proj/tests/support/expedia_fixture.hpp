#pragma once

// Synthetic Expedia-schema fixture built from the simulator: hotel prices,
// ratings and clicks derived from one seeded market, plus a few impressions
// crafted to trip each ingestion filter. Deterministic by construction.

#include <string>

#include "pmrank/csv.hpp"
#include "pmrank/simulate.hpp"

namespace pmrank::testsupport {

inline std::string default_fixture_header() {
    return "srch_id,prop_id,position,price_usd,promotion_flag,prop_starrating,"
           "prop_review_score,prop_brand_bool,prop_location_score1,srch_booking_window,"
           "click_bool,booking_bool,srch_length_of_stay,gross_bookings_usd,click_order";
}

inline std::string make_synthetic_expedia_csv(std::uint64_t seed = 314, int n_impressions = 160,
                                              int n_hotels = 30) {
    MarketConfig mc;
    mc.n_consumers = n_impressions;
    mc.n_products = n_hotels + 1;
    mc.seed = seed;
    mc.price_intercept = 0.6;
    const Market m = generate_market(mc);
    const auto records = simulate_searches(m);

    std::string out = default_fixture_header() + "\n";
    auto emit = [&](long imp, int hotel, double pos, double price, int promo, double star,
                    double review, int chain, double loc, double window, int clicked,
                    int purchased, double nights, double total, int order) {
        out += std::to_string(imp) + "," + std::to_string(hotel) + "," +
               format_double_short(pos) + "," + format_double_short(price) + "," +
               std::to_string(promo) + "," + format_double_short(star) + "," +
               format_double_short(review) + "," + std::to_string(chain) + "," +
               format_double_short(loc) + "," + format_double_short(window) + "," +
               std::to_string(clicked) + "," + std::to_string(purchased) + "," +
               format_double_short(nights) + "," + format_double_short(total) + "," +
               std::to_string(order) + "\n";
    };

    for (int a = 0; a < m.n; ++a) {
        const auto& rec = records[a];
        const double window = std::max(0.0, std::floor(30.0 + 18.0 * m.z_at(a, 1)[1]));
        for (int j = 1; j < m.J; ++j) {
            const double price =
                std::max(15.0, 100.0 * (2.0 + 0.8 * m.x_at(a, j)[0]) + 7.0 * (j % 5));
            const int promo = m.x_at(a, j)[1] > 0.5 ? 1 : 0;
            const double star = 1.0 + (j % 5);
            const double review = 3.0 + 0.4 * ((j * 7) % 5);
            const int chain = j % 2;
            const double loc = 2.0 + 0.5 * (j % 7);
            int clicked = 0, purchased = 0, order = -1;
            for (std::size_t k = 0; k < rec.searched.size(); ++k)
                if (rec.searched[k] == j) {
                    clicked = 1;
                    order = static_cast<int>(k);
                }
            if (rec.purchase == j) purchased = 1;
            const double nights = 1.0 + ((a + j) % 3);
            const double total = purchased ? price * nights * 1.12 : 0.0;
            emit(a + 1, j, m.z_at(a, j)[0], price, promo, star, review, chain, loc, window,
                 clicked, purchased, nights, total, order);
        }
    }
    // crafted impressions exercising the filters end to end
    const long base = n_impressions + 100;
    emit(base + 1, 1, 1, 9.0, 0, 3, 4, 1, 3, 10, 1, 0, 2, 0, 0);    // $9: price band drop
    emit(base + 1, 2, 2, 120, 0, 3, 4, 1, 3, 10, 0, 0, 2, 0, -1);
    emit(base + 2, 1, 1, 1200.5, 0, 3, 4, 1, 3, 5, 1, 0, 1, 0, 0);  // > $1000: drop
    emit(base + 2, 3, 2, 90, 1, 4, 4.4, 0, 3.5, 5, 0, 0, 1, 0, -1);
    emit(base + 3, 2, 1, 100, 0, 3, 4, 1, 3, 7, 1, 1, 2, 262.0, 0);  // 131%: total drop
    emit(base + 3, 4, 2, 80, 0, 2, 3.6, 0, 2.5, 7, 0, 0, 2, 0, -1);
    return out;
}

inline nlohmann::json default_fixture_manifest(const std::string& csv_name) {
    return nlohmann::json{
        {"spec_version", 1},
        {"type", "expedia_csv"},
        {"csv", csv_name},
        {"columns", nlohmann::json::object()},
        {"pair_mode", "exactly_one_clicked"},
        {"min_impressions", 100},
        {"min_displayed", 24},
        {"note", "synthetic fixture generated from the bundled simulator, seed 314"}};
}

}  // namespace pmrank::testsupport
