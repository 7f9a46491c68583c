#pragma once

#include "mdae/pose_repr.hpp"

namespace mdae {

enum class ViewPlane { XZ, YZ, XY };

struct RenderOptions {
    ViewPlane plane = ViewPlane::XZ; // orthographic projection plane
    int width = 320;                 // SVG canvas, pixels
    int height = 320;
    double margin = 0.1; // fraction of canvas left blank on each side
    int frame_stride = 1;
};

/// Writes markers.csv (frame,marker,x,y,z) plus frame_%04d.svg stick figures
/// into out_dir. Returns the number of SVG files written.
int render_sequence(const MotionSequence& seq, const SkeletonChain& chain,
                    const std::string& out_dir, const RenderOptions& options = {});

} // namespace mdae
