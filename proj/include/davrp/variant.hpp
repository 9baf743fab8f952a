#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace davrp {

// One routing variant = capacity (always active) plus any subset of the four
// optional constraints. The multi-hot layout is fixed as [C, O, B, L, TW].
struct VariantSpec {
    bool open_route = false;      // O: vehicles do not return to the depot
    bool backhaul = false;        // B: negative demands, linehaul-first rule
    bool duration_limit = false;  // L: per-route length budget
    bool time_window = false;     // TW: service windows + route horizon

    std::array<double, 5> multi_hot() const {
        return {1.0,
                open_route ? 1.0 : 0.0,
                backhaul ? 1.0 : 0.0,
                duration_limit ? 1.0 : 0.0,
                time_window ? 1.0 : 0.0};
    }

    // Canonical lowercase name, e.g. "cvrp", "ovrpbltw".
    std::string name() const {
        bool suffixed = backhaul || duration_limit || time_window;
        std::string s = open_route ? "ovrp" : (suffixed ? "vrp" : "cvrp");
        if (backhaul) s += 'b';
        if (duration_limit) s += 'l';
        if (time_window) s += "tw";
        return s;
    }

    static std::optional<VariantSpec> from_name(std::string_view nm) {
        for (const VariantSpec& v : all16())
            if (v.name() == nm) return v;
        return std::nullopt;
    }

    // All 16 variants, ordered by the 4-bit index (O,B,L,TW) = bit (0,1,2,3).
    static const std::vector<VariantSpec>& all16() {
        static const std::vector<VariantSpec> table = [] {
            std::vector<VariantSpec> t;
            for (int bits = 0; bits < 16; ++bits) {
                VariantSpec v;
                v.open_route = (bits >> 0) & 1;
                v.backhaul = (bits >> 1) & 1;
                v.duration_limit = (bits >> 2) & 1;
                v.time_window = (bits >> 3) & 1;
                t.push_back(v);
            }
            return t;
        }();
        return table;
    }

    bool operator==(const VariantSpec&) const = default;
};

}  // namespace davrp
