#include "mdae/render.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

namespace mdae {

namespace {

std::pair<double, double> project(const Vec3& p, ViewPlane plane) {
    switch (plane) {
    case ViewPlane::XZ: return {p.x(), p.z()};
    case ViewPlane::YZ: return {p.y(), p.z()};
    case ViewPlane::XY: return {p.x(), p.y()};
    }
    throw Error("render: unknown view plane");
}

} // namespace

int render_sequence(const MotionSequence& seq, const SkeletonChain& chain,
                    const std::string& out_dir, const RenderOptions& options) {
    if (seq.frames() == 0) throw Error("render: empty sequence");
    if (options.frame_stride < 1) throw Error("render: frame stride must be >= 1");
    chain.validate();
    std::vector<std::pair<int, int>> bones;
    for (const auto& link : chain.links) {
        bones.emplace_back(seq.marker_index(link.parent), seq.marker_index(link.child));
    }

    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    {
        std::ofstream csv(fs::path(out_dir) / "markers.csv");
        if (!csv) throw IoError("cannot write markers.csv in " + out_dir);
        csv << "frame,marker,x,y,z\n";
        csv.precision(17);
        for (int f = 0; f < seq.frames(); ++f) {
            for (int m = 0; m < seq.marker_count(); ++m) {
                const Vec3 p = seq.pos(f, m);
                csv << f << ',' << seq.markers[static_cast<std::size_t>(m)] << ','
                    << p.x() << ',' << p.y() << ',' << p.z() << '\n';
            }
        }
        if (!csv) throw IoError("write failed: markers.csv");
    }

    // Shared bounds across frames so the figure does not jitter.
    double lo_u = 1e300, hi_u = -1e300, lo_v = 1e300, hi_v = -1e300;
    for (int f = 0; f < seq.frames(); ++f) {
        for (int m = 0; m < seq.marker_count(); ++m) {
            const auto [u, v] = project(seq.pos(f, m), options.plane);
            lo_u = std::min(lo_u, u);
            hi_u = std::max(hi_u, u);
            lo_v = std::min(lo_v, v);
            hi_v = std::max(hi_v, v);
        }
    }
    const double span_u = std::max(hi_u - lo_u, 1e-9);
    const double span_v = std::max(hi_v - lo_v, 1e-9);
    const double span = std::max(span_u, span_v);
    const double usable = 1.0 - 2.0 * options.margin;
    const double scale = usable * std::min(options.width, options.height) / span;
    const auto to_px = [&](double u, double v) {
        const double x = options.width / 2.0 + (u - (lo_u + hi_u) / 2.0) * scale;
        const double y = options.height / 2.0 - (v - (lo_v + hi_v) / 2.0) * scale;
        return std::pair<double, double>(x, y);
    };

    int written = 0;
    for (int f = 0; f < seq.frames(); f += options.frame_stride) {
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%04d.svg", f);
        std::ofstream svg(fs::path(out_dir) / name);
        if (!svg) throw IoError(std::string("cannot write ") + name + " in " + out_dir);
        svg.precision(6);
        svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << options.width
            << "\" height=\"" << options.height << "\" viewBox=\"0 0 " << options.width
            << ' ' << options.height << "\">\n";
        svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
        for (const auto& [pi, ci] : bones) {
            const auto [up, vp] = project(seq.pos(f, pi), options.plane);
            const auto [uc, vc] = project(seq.pos(f, ci), options.plane);
            const auto [x1, y1] = to_px(up, vp);
            const auto [x2, y2] = to_px(uc, vc);
            svg << "<line x1=\"" << x1 << "\" y1=\"" << y1 << "\" x2=\"" << x2
                << "\" y2=\"" << y2 << "\" stroke=\"#333\" stroke-width=\"2\"/>\n";
        }
        for (int m = 0; m < seq.marker_count(); ++m) {
            const auto [u, v] = project(seq.pos(f, m), options.plane);
            const auto [x, y] = to_px(u, v);
            svg << "<circle cx=\"" << x << "\" cy=\"" << y
                << "\" r=\"3\" fill=\"#c22\"/>\n";
        }
        svg << "</svg>\n";
        if (!svg) throw IoError(std::string("write failed: ") + name);
        ++written;
    }
    return written;
}

} // namespace mdae
