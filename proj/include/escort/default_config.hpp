#ifndef ESCORT_DEFAULT_CONFIG_HPP
#define ESCORT_DEFAULT_CONFIG_HPP

namespace escort {

/// Shipped layer set; identical to configs/default.cfg.
inline constexpr const char* kDefaultConfig = R"cfg(# Desk-scale layer set.
#
# Shapes follow the standard architecture definitions with channel counts
# scaled down so a full sweep runs in seconds on one core:
#   AlexNet conv2-5   (Krizhevsky et al. 2012; conv2 27x27 5x5 pad 2,
#                      conv3-5 13x13 3x3 pad 1; single group, channels /4)
#   GoogLeNet 3a      (Szegedy et al. 2015; 28x28 1x1 reduce and 3x3
#                      branch, channels /2 or /3)
#   ResNet basic 3x3  (He et al. 2016; 3x3 pad 1 at 32x32, plus the
#                      stride-2 downsampling variant)
# Pads are chosen so output sizes match the originals.

layer alexnet_conv2
n = 2
m = 64
c = 48
h = 27
w = 27
r = 5
s = 5
pad = 2
sparsity = 0.8

layer alexnet_conv3
n = 4
m = 96
c = 64
h = 13
w = 13
r = 3
s = 3
pad = 1
sparsity = 0.8

layer alexnet_conv4
n = 4
m = 96
c = 96
h = 13
w = 13
r = 3
s = 3
pad = 1
sparsity = 0.85

layer alexnet_conv5
n = 4
m = 64
c = 96
h = 13
w = 13
r = 3
s = 3
pad = 1
sparsity = 0.85

layer googlenet_3a_1x1
n = 2
m = 32
c = 64
h = 28
w = 28
r = 1
s = 1
sparsity = 0.7

layer googlenet_3a_3x3
n = 2
m = 64
c = 48
h = 28
w = 28
r = 3
s = 3
pad = 1
sparsity = 0.8

layer resnet_3x3
n = 8
m = 64
c = 64
h = 32
w = 32
r = 3
s = 3
pad = 1
sparsity = 0.9

layer resnet_down
n = 4
m = 64
c = 32
h = 32
w = 32
r = 3
s = 3
stride = 2
pad = 1
sparsity = 0.9
)cfg";

}  // namespace escort

#endif  // ESCORT_DEFAULT_CONFIG_HPP
