use bbpeel::bbcode::named_code;
use bbpeel::decoder::{Decoder, DecoderConfig, PeelMode};
use bbpeel::harness::alloc::{count_allocations, is_installed, CountingAllocator};
use bbpeel::harness::memory_dem;
use bbpeel::sampler::Sampler;

#[global_allocator]
static ALLOC: CountingAllocator = CountingAllocator;

fn syndromes(name: &str, p: f64, shots: u64) -> (bbpeel::dem::Dem, Vec<Vec<u32>>) {
    let dem = memory_dem(&named_code(name).unwrap(), 12, p).unwrap();
    let mut sampler = Sampler::new(&dem, 17);
    let syns = (0..shots).map(|i| sampler.shot(i).syndrome).collect();
    (dem, syns)
}

#[test]
fn hook_counts_allocations() {
    assert!(is_installed());
    let (v, n) = count_allocations(|| vec![1u8; 32]);
    assert_eq!(v.len(), 32);
    assert_eq!(n, Some(1));
}

#[test]
fn peel_path_does_not_allocate() {
    for mode in [PeelMode::SinglePass, PeelMode::QueueBased, PeelMode::BatchIterative] {
        let (dem, syns) = syndromes("gross-144", 0.002, 500);
        let mut dec = Decoder::new(&dem, DecoderConfig { mode, ..Default::default() });
        let (total, allocs) = count_allocations(|| syns.iter().map(|s| dec.peel_only(s).unwrap().peeled).sum::<u32>());
        assert!(total > 0);
        assert_eq!(allocs, Some(0), "{mode:?}");
    }
}

#[test]
fn full_decode_does_not_allocate_after_construction() {
    let (dem, syns) = syndromes("gross-72", 0.003, 500);
    let mut dec = Decoder::new(&dem, DecoderConfig::default());
    let (phases, allocs) = count_allocations(|| {
        let mut phases = [0u32; 3];
        for s in &syns {
            phases[dec.decode(s).unwrap().phase as usize] += 1;
            dec.decode_bp_only(s).unwrap();
        }
        phases
    });
    assert!(phases[2] > 0, "no shot reached BP: {phases:?}");
    assert_eq!(allocs, Some(0));
}
