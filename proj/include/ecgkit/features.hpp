#pragma once

#include "ecgkit/nn.hpp"
#include "ecgkit/qrs.hpp"
#include "ecgkit/raster.hpp"
#include "ecgkit/record.hpp"

namespace ecg {

// Record-to-tensor preparation shared by training, evaluation and the CLI.
//
// Signal models consume a fixed window: each lead is truncated or
// zero-padded to input_len samples, then z-scored over that window (a flat
// lead becomes all zeros). The image model consumes the rasterised record
// with pixels scaled to [0,1]. When QRS features are enabled, the feature
// vector of lead II under the default detector rides along as the auxiliary
// input.
nn::Example make_example(const EcgRecord& record, const nn::ArchSpec& arch);

}  // namespace ecg
