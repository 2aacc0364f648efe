#include "inrstrain/upsample.hpp"

#include "inrstrain/errors.hpp"

namespace inrstrain {

void UpsampleSpec::validate() const
{
    if (factor < 1) {
        throw ConfigError("upsample: factor must be >= 1");
    }
    if (method != "linear") {
        throw ConfigError("upsample: unknown method '" + method + "'");
    }
}

Geometry upsampled_geometry(const Geometry& g, int factor)
{
    Geometry out = g;
    out.dims[2] = (g.dims[2] - 1) * factor + 1;
    out.spacing[2] = g.spacing[2] / factor;
    return out;
}

namespace {

void check_input(const Geometry& g, const UpsampleSpec& spec)
{
    spec.validate();
    if (spec.factor > 1 && g.dims[2] < 2) {
        throw DataError("upsample: at least two slices are required");
    }
}

} // namespace

Volume3D upsample_through_plane(const Volume3D& vol, const UpsampleSpec& spec)
{
    check_input(vol.geom, spec);
    if (spec.factor == 1) {
        return vol;
    }
    const int k = spec.factor;
    Volume3D out(upsampled_geometry(vol.geom, k));
    const auto& d = vol.geom.dims;
    for (int z = 0; z < out.geom.dims[2]; ++z) {
        const int s0 = z / k;
        const int r = z % k;
        for (int j = 0; j < d[1]; ++j) {
            for (int i = 0; i < d[0]; ++i) {
                if (r == 0) {
                    out.at(i, j, z) = vol.at(i, j, s0);
                } else {
                    const double w = static_cast<double>(r) / k;
                    out.at(i, j, z) = static_cast<float>((1.0 - w) * vol.at(i, j, s0) + w * vol.at(i, j, s0 + 1));
                }
            }
        }
    }
    return out;
}

LabelMask upsample_mask(const LabelMask& mask, const UpsampleSpec& spec)
{
    check_input(mask.geom, spec);
    if (spec.factor == 1) {
        return mask;
    }
    const int k = spec.factor;
    LabelMask out(upsampled_geometry(mask.geom, k));
    const auto& d = mask.geom.dims;
    for (int z = 0; z < out.geom.dims[2]; ++z) {
        const int s0 = z / k;
        const int r = z % k;
        const double w = static_cast<double>(r) / k;
        for (int j = 0; j < d[1]; ++j) {
            for (int i = 0; i < d[0]; ++i) {
                const std::uint8_t a = mask.at(i, j, s0);
                if (r == 0) {
                    out.at(i, j, z) = a;
                    continue;
                }
                const std::uint8_t b = mask.at(i, j, s0 + 1);
                // Only the two source labels carry weight; the argmax of
                // the blended one-hot channels picks between them.
                std::uint8_t best = a;
                if (a != b) {
                    const double wa = 1.0 - w, wb = w;
                    if (wb > wa || (wb == wa && b < a)) {
                        best = b;
                    }
                }
                out.at(i, j, z) = best;
            }
        }
    }
    return out;
}

} // namespace inrstrain
