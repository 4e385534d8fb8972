const app = getApp()

Page({
  data: {
    userInfo: {},
    hasUserInfo: false
  },

  getUserProfile(e) {
    wx.getUserProfile({
      desc: 'Used to complete your member profile',
      success: (res) => {
        this.setData({
          userInfo: res.userInfo,
          hasUserInfo: true
        })
        wx.setStorageSync('userInfo', res.userInfo)
      }
    })
  },

  onLoad() {
    wx.login({
      success(res) {
        wx.request({
          url: 'https://api.example.com/session',
          method: 'POST',
          data: { code: res.code }
        })
      }
    })
  }
})
