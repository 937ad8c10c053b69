#pragma once

#include <memory>
#include <string>

#include "tworld/denoiser.hpp"
#include "tworld/pipeline.hpp"

namespace tworld {

/// Builds a denoiser from a textual spec:
///   zero
///   point:mu=0.5[;uncond=0][;table=targets.json]
///   mixture:pi=0.5,0.5;mu=-1,1
///   pattern:constant=0.5 | pattern:border=0,1[;table=patterns.json]
///   remote:cmd=<shell command> | remote:tcp=<host:port>[;timeout=<seconds>]
std::unique_ptr<Denoiser> make_denoiser(const std::string& spec);

/// Builds a payload decoder for `input_channels` latent channels:
///   identity | rgb | ramp:slope=0.5
///   linear:w=a,b,c/d,e,f[;b=x,y]  (rows separated by '/')
std::unique_ptr<Decoder> make_decoder(const std::string& spec, int input_channels);

/// Latent -> occupancy decoder: affine[:w=...;b=...;up=4]. Defaults to the
/// channel mean, zero bias and 4x upsampling.
std::unique_ptr<Decoder> make_structure_decoder(const std::string& spec, int input_channels);

}  // namespace tworld
