Page({
  data: {
    phone: ''
  },

  onLoad: function () {
    var contact = wx.getStorageSync('lastContact')
    this.setData({ phone: contact.mobile })
  }
})
